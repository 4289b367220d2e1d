//! Enforcement strategies: each builds a [`TaskStrategy`] over an explicit finite schedule.
//!
//! Steps that the oracle cannot certify are flagged in the ledger and skipped; nothing is
//! silently dropped.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::etypes::{is_isolated_probe, maximal_types, ETypeApprox, Isolation};
use crate::forcing::Interval;
use crate::game::{Task, TaskStrategy};
use crate::logic::classify::{classify, is_existential, is_quantifier_free, is_restricted, strip_block};
use crate::logic::derived::max_all;
use crate::logic::eval::eval_sentence;
use crate::logic::formula::{Formula, Term};
use crate::logic::parse::{parse_formula, ParseError};
use crate::logic::signature::Signature;
use crate::oracle::{Condition, SearchBounds, Theory};
use crate::structures::{tuples, FiniteStructure};

mod backforth;
mod tasks;

pub use backforth::{backforth_compare, BackForthChain, BackForthFailure, Direction, PartialMap};
pub use tasks::{EAtomicTask, EcTask, ExtraCanonicalTask, FiniteGenericTask, SupJoinInfTask, UniversalTask};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EnforcerError {
    #[error("`{0}` is not a universal sentence with a restricted matrix")]
    NotUniversal(String),
    #[error("`{0}` is not an existential formula with a restricted matrix")]
    NotExistential(String),
    #[error("`{0}` is not a sup-join-inf sentence with restricted matrices")]
    NotSupJoinInf(String),
    #[error("`{0}` is not a restricted sentence")]
    NotRestricted(String),
    #[error("threshold 1/{0} is not a dyadic rational in (0,1]")]
    Threshold(u64),
    #[error("reference structure {index}: {reason}")]
    Reference { index: usize, reason: String },
    #[error("formula: {0}")]
    Parse(#[from] ParseError),
}

/// `1/n` for a power of two `n`.
fn inverse(n: u64) -> Result<Dyadic, EnforcerError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(EnforcerError::Threshold(n));
    }
    Ok(Dyadic::pow2_inv(n.trailing_zeros()))
}

fn boxed<T: Task + 'static>(ts: Vec<T>) -> Vec<Box<dyn Task>> {
    ts.into_iter().map(|t| Box::new(t) as Box<dyn Task>).collect()
}

fn constant_tuples(constants: u32, arity: usize) -> Vec<Vec<u32>> {
    tuples(constants as usize, arity).into_iter().map(|t| t.into_iter().map(|e| e as u32).collect()).collect()
}

/// One `(center, 2^-k, copies)` density requirement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Density {
    pub center: u32,
    pub k: u32,
    pub copies: usize,
}

/// Every scheduled ball around a center receives `copies` fresh constants.
pub fn enforce_extra_canonical(schedule: &[Density]) -> TaskStrategy {
    enforce_extra_canonical_reserving(schedule, 0)
}

/// As [`enforce_extra_canonical`], with fresh constants drawn from `c{reserved}` upward so the
/// first `reserved` names stay free for other schedules.
pub fn enforce_extra_canonical_reserving(schedule: &[Density], reserved: u32) -> TaskStrategy {
    let ts = schedule.iter().map(|d| ExtraCanonicalTask::new(d.center, d.k, d.copies).reserving(reserved)).collect();
    TaskStrategy::new("extra-canonical", boxed(ts), 1)
}

/// Matrix instances of every axiom over tuples of the first `constants` constants, at
/// thresholds `1/n` for `n` in `ns` (powers of two).
pub fn enforce_universal(theory: &Theory, constants: u32, ns: &[u64]) -> Result<TaskStrategy, EnforcerError> {
    for a in &theory.axioms {
        let (_, m) = strip_block(a, false);
        if !(is_quantifier_free(m) && is_restricted(m)) {
            return Err(EnforcerError::NotUniversal(a.to_string()));
        }
    }
    let mut ts = Vec::new();
    for &n in ns {
        let r = inverse(n)?;
        for a in &theory.axioms {
            let arity = strip_block(a, false).0.len();
            for t in constant_tuples(constants, arity) {
                ts.push(UniversalTask::new(a, &t, r));
            }
        }
    }
    Ok(TaskStrategy::new("universal", boxed(ts), 1))
}

/// One scheduled existential requirement `phi(tuple) < r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcItem {
    pub phi: Formula,
    pub tuple: Vec<u32>,
    pub r: Dyadic,
}

fn check_existential(phi: &Formula, arity: usize) -> Result<(), EnforcerError> {
    let (ys, m) = strip_block(phi, true);
    let free_ok = phi.free_vars().iter().all(|&v| (v as usize) < arity);
    if !(is_existential(phi) && is_restricted(m) && free_ok && !ys.is_empty()) {
        return Err(EnforcerError::NotExistential(phi.to_string()));
    }
    Ok(())
}

pub fn enforce_ec(items: Vec<EcItem>) -> Result<TaskStrategy, EnforcerError> {
    let mut ts = Vec::new();
    for it in items {
        check_existential(&it.phi, it.tuple.len())?;
        ts.push(EcTask::new(it.phi, it.tuple, it.r));
    }
    Ok(TaskStrategy::new("ec", boxed(ts), 1))
}

/// Default dovetail: coarse thresholds first, then formulas, then constant tuples.
pub fn ec_schedule(formulas: &[Formula], constants: u32, thresholds: &[Dyadic]) -> Vec<EcItem> {
    let mut out = Vec::new();
    for &r in thresholds {
        for phi in formulas {
            let arity = phi.free_vars().iter().map(|&v| v as usize + 1).max().unwrap_or(0);
            for t in constant_tuples(constants, arity) {
                out.push(EcItem { phi: phi.clone(), tuple: t, r });
            }
        }
    }
    out
}

/// `inf x1 . l(x0, x1)` for every literal `l` on an atom mentioning `x1`.
pub fn one_step_formulas(sig: &Signature) -> Vec<Formula> {
    crate::etypes::etype_formulas(sig, 1, 1).into_iter().filter(|f| !f.is_atomic()).collect()
}

/// Extension-axiom instances over disjoint `A, B` of the first `constants` constants with
/// `1 <= |A ∪ B| <= max_size`: some `y` outside `A ∪ B` is adjacent to all of `A` and none of
/// `B`. Threshold `1/2`.
pub fn extension_axioms(constants: u32, max_size: usize) -> Vec<EcItem> {
    let e = |a: Term, b: Term| Formula::atom("E", vec![a, b]);
    let y = || Term::var(0);
    let mut out = Vec::new();
    for size in 1..=max_size.min(constants as usize) {
        for support in itertools::Itertools::combinations(0..constants, size) {
            for mask in 0..(1u32 << size) {
                let mut lits = Vec::new();
                for (i, &c) in support.iter().enumerate() {
                    let adj = e(Term::c(c), y());
                    lits.push(if mask & (1 << i) != 0 { adj } else { adj.neg() });
                }
                for &c in &support {
                    lits.push(Formula::dist(Term::c(c), y()).neg());
                }
                out.push(EcItem { phi: Formula::inf(0, max_all(lits)), tuple: vec![], r: Dyadic::pow2_inv(1) });
            }
        }
    }
    out
}

/// `sup x . join_n inf y . psi_n` instances over the first `constants` constants at thresholds
/// `1/k`. Each reference must satisfy every sentence exactly and model the theory.
pub fn enforce_supjoininf(
    theory: &Theory,
    sentences: &[Formula],
    references: Vec<FiniteStructure>,
    constants: u32,
    ks: &[u64],
) -> Result<TaskStrategy, EnforcerError> {
    for s in sentences {
        let c = classify(s);
        let (_, body) = strip_block(s, false);
        let matrices_ok = match body {
            Formula::Join(ms) => ms.iter().all(|m| is_restricted(strip_block(m, true).1)),
            _ => false,
        };
        if !(c.sup_join_inf && matrices_ok && s.is_sentence()) {
            return Err(EnforcerError::NotSupJoinInf(s.to_string()));
        }
    }
    for (index, r) in references.iter().enumerate() {
        if r.validate(&theory.signature).is_err() || !theory.is_model(r) {
            return Err(EnforcerError::Reference { index, reason: "not a model of the theory".into() });
        }
        for s in sentences {
            if !matches!(eval_sentence(s, r), Ok(v) if v.is_zero()) {
                return Err(EnforcerError::Reference { index, reason: format!("violates `{s}`") });
            }
        }
    }
    let refs = Arc::new(references);
    let mut ts = Vec::new();
    for &k in ks {
        let r = inverse(k)?;
        for s in sentences {
            let arity = strip_block(s, false).0.len();
            for t in constant_tuples(constants, arity) {
                ts.push(SupJoinInfTask::new(s, t, r, Arc::clone(&refs)));
            }
        }
    }
    Ok(TaskStrategy::new("sup-join-inf", boxed(ts), 1))
}

pub fn enforce_finite_generic(schedule: Vec<(Formula, Dyadic)>) -> Result<TaskStrategy, EnforcerError> {
    let mut ts = Vec::new();
    for (phi, eps) in schedule {
        if !(is_restricted(&phi) && phi.is_sentence()) {
            return Err(EnforcerError::NotRestricted(phi.to_string()));
        }
        ts.push(FiniteGenericTask::new(phi, eps));
    }
    Ok(TaskStrategy::new("finite-generic", boxed(ts), 1))
}

/// Answers isolation questions for existential types.
pub trait IsolationProbe: Send + Sync {
    fn depth(&self) -> usize;
    /// A neighbourhood `[theta < eta]` of an isolated type refining `pi`, inside its `eps`-ball.
    fn isolate(&self, theory: &Theory, pi: &ETypeApprox, eps: Dyadic) -> Isolation;
}

/// Runs [`is_isolated_probe`] on the searched maximal types refining the query, memoised per
/// type and tolerance.
pub struct ClassicalProbe {
    pub depth: usize,
    pub search: SearchBounds,
    cache: Mutex<BTreeMap<(Vec<Interval>, Dyadic), Isolation>>,
}

impl ClassicalProbe {
    pub fn new(depth: usize, search: SearchBounds) -> ClassicalProbe {
        ClassicalProbe { depth, search, cache: Mutex::new(BTreeMap::new()) }
    }
}

impl IsolationProbe for ClassicalProbe {
    fn depth(&self) -> usize {
        self.depth
    }

    fn isolate(&self, theory: &Theory, pi: &ETypeApprox, eps: Dyadic) -> Isolation {
        let key = (pi.key(), eps);
        if let Some(hit) = self.cache.lock().expect("probe cache poisoned").get(&key) {
            return hit.clone();
        }
        let out = match maximal_types(theory, pi.arity, pi.depth, &self.search) {
            None => Isolation::Unknown { reason: "type search needs a relational signature".into() },
            Some((maximal, _)) => {
                let mut out = Isolation::Unknown { reason: "no searched maximal type refines the current type".into() };
                for rho in maximal.iter().filter(|r| r.refines(pi)) {
                    out = is_isolated_probe(theory, rho, eps, &self.search);
                    if matches!(out, Isolation::Isolated { .. }) {
                        break;
                    }
                }
                out
            }
        };
        self.cache.lock().expect("probe cache poisoned").insert(key, out.clone());
        out
    }
}

/// One task per `(tuple, delta)`.
pub fn enforce_eatomic(probe: Arc<dyn IsolationProbe>, schedule: Vec<(Vec<u32>, Dyadic)>) -> TaskStrategy {
    let ts = schedule.into_iter().map(|(t, d)| EAtomicTask::new(t, d, Arc::clone(&probe))).collect();
    TaskStrategy::new("e-atomic", boxed(ts), 1)
}

/// Schedule parameters for one named enforcer, as stored in session files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnforcerSpec {
    ExtraCanonical {
        schedule: Vec<Density>,
        #[serde(default)]
        reserved: u32,
    },
    Universal {
        constants: u32,
        ns: Vec<u64>,
    },
    Ec {
        /// Existential formulas in `x0..`; empty means the one-step literal family.
        #[serde(default)]
        formulas: Vec<String>,
        constants: u32,
        thresholds: Vec<Dyadic>,
    },
    ExtensionAxioms {
        constants: u32,
        max_size: usize,
    },
    FiniteGeneric {
        schedule: Vec<GenericItem>,
    },
    EAtomic {
        constants: u32,
        deltas: Vec<Dyadic>,
        depth: usize,
        max_universe: usize,
    },
    SupJoinInf {
        sentences: Vec<String>,
        constants: u32,
        ks: Vec<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericItem {
    pub sentence: String,
    pub eps: Dyadic,
}

/// Enforcer configuration block: components conjoined in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnforcerConfig {
    pub components: Vec<EnforcerSpec>,
    #[serde(default = "default_fuel")]
    pub fuel: usize,
}

fn default_fuel() -> usize {
    2
}

impl EnforcerConfig {
    /// `extra_canonical + universal + ec` with the default dovetailed schedules.
    pub fn canonical_ec() -> EnforcerConfig {
        EnforcerConfig {
            components: vec![
                EnforcerSpec::ExtraCanonical { schedule: vec![Density { center: 0, k: 1, copies: 1 }], reserved: 6 },
                EnforcerSpec::Universal { constants: 4, ns: vec![2] },
                EnforcerSpec::Ec {
                    formulas: vec![],
                    constants: 6,
                    thresholds: vec![Dyadic::pow2_inv(1), Dyadic::pow2_inv(2), Dyadic::pow2_inv(3)],
                },
            ],
            fuel: default_fuel(),
        }
    }

    pub fn build(&self, theory: &Theory) -> Result<TaskStrategy, EnforcerError> {
        let sig = &theory.signature;
        let mut parts = Vec::new();
        for c in &self.components {
            parts.push(match c {
                EnforcerSpec::ExtraCanonical { schedule, reserved } => enforce_extra_canonical_reserving(schedule, *reserved),
                EnforcerSpec::Universal { constants, ns } => enforce_universal(theory, *constants, ns)?,
                EnforcerSpec::Ec { formulas, constants, thresholds } => {
                    let fs = if formulas.is_empty() {
                        one_step_formulas(sig)
                    } else {
                        formulas.iter().map(|f| parse_formula(f, sig)).collect::<Result<_, _>>()?
                    };
                    enforce_ec(ec_schedule(&fs, *constants, thresholds))?
                }
                EnforcerSpec::ExtensionAxioms { constants, max_size } => enforce_ec(extension_axioms(*constants, *max_size))?,
                EnforcerSpec::FiniteGeneric { schedule } => {
                    let items = schedule
                        .iter()
                        .map(|g| Ok((parse_formula(&g.sentence, sig)?, g.eps)))
                        .collect::<Result<Vec<_>, EnforcerError>>()?;
                    enforce_finite_generic(items)?
                }
                EnforcerSpec::EAtomic { constants, deltas, depth, max_universe } => {
                    let mut b = SearchBounds::for_theory(theory);
                    b.max_universe = *max_universe;
                    let probe: Arc<dyn IsolationProbe> = Arc::new(ClassicalProbe::new(*depth, b));
                    let schedule = deltas
                        .iter()
                        .flat_map(|&d| (0..*constants).map(move |c| (vec![c], d)))
                        .collect();
                    enforce_eatomic(probe, schedule)
                }
                EnforcerSpec::SupJoinInf { sentences, constants, ks } => {
                    let fs: Vec<Formula> = sentences.iter().map(|f| parse_formula(f, sig)).collect::<Result<_, _>>()?;
                    enforce_supjoininf(theory, &fs, theory.reference_structures.clone(), *constants, ks)?
                }
            });
        }
        Ok(crate::game::conjoin(parts, self.fuel))
    }
}

/// Ledger report document for one run.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerReport {
    pub strategy: String,
    pub done: usize,
    pub flagged: usize,
    pub pending: usize,
    /// Done tasks whose postcondition does not re-verify against the final condition.
    pub unverified: Vec<String>,
    pub entries: Vec<crate::game::LedgerEntry>,
}

pub fn ledger_report(s: &TaskStrategy, last: &Condition) -> LedgerReport {
    use crate::game::{Strategy, TaskStatus};
    let entries = s.ledger();
    let count = |f: fn(&TaskStatus) -> bool| entries.iter().filter(|e| f(&e.status)).count();
    LedgerReport {
        strategy: s.name(),
        done: count(TaskStatus::is_done),
        flagged: count(|t| matches!(t, TaskStatus::Flagged(_))),
        pending: count(TaskStatus::is_pending),
        unverified: s.unverified(last),
        entries,
    }
}

#[cfg(test)]
mod tests;

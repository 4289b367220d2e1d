use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use itertools::Itertools;

use crate::dyadic::Dyadic;
use crate::etypes::{etype_of, Isolation};
use crate::forcing::{narrow, Interval};
use crate::game::{Task, TaskStatus};
use crate::logic::classify::strip_block;
use crate::logic::eval::{eval, eval_sentence, Assignment};
use crate::logic::formula::{Formula, Term};
use crate::oracle::pool::fresh_constants;
use crate::oracle::{bounds_hold, verify_witness, Bound, Certificate, Condition, Oracle, Verdict};
use crate::structures::FiniteStructure;

use super::IsolationProbe;

/// Largest number of existing-constant tuples tried before falling back to fresh witnesses.
const REUSE_LIMIT: usize = 4096;

fn subst(vars: &[u32], consts: &[u32]) -> BTreeMap<u32, Term> {
    vars.iter().copied().zip(consts.iter().map(|&c| Term::c(c))).collect()
}

fn tuple_name(cs: &[u32]) -> String {
    cs.iter().map(|c| format!("c{c}")).collect::<Vec<_>>().join(",")
}

fn used_constants(q: &Condition, extra: &[u32]) -> BTreeSet<u32> {
    let mut used = q.constants();
    used.extend(extra.iter().copied());
    if let Some(w) = q.witness() {
        used.extend(w.constants.keys().copied());
    }
    used
}

/// Certifies `q ∪ adds`, recording the outcome in `status`; returns the new working condition.
fn play(oracle: &Oracle, q: &Condition, adds: &[Bound], status: &mut TaskStatus, done: String) -> Condition {
    match oracle.certify(q, adds) {
        Ok(Some(c)) => {
            *status = TaskStatus::Done(done);
            c
        }
        Ok(None) => {
            *status = TaskStatus::Flagged("oracle did not certify the step".into());
            q.clone()
        }
        Err(e) => {
            *status = TaskStatus::Flagged(e.to_string());
            q.clone()
        }
    }
}

/// Places `copies` fresh constants within `2^-k` of `center`.
pub struct ExtraCanonicalTask {
    pub center: u32,
    pub k: u32,
    pub copies: usize,
    reserved: u32,
    status: TaskStatus,
    placed: Vec<Bound>,
}

impl ExtraCanonicalTask {
    pub fn new(center: u32, k: u32, copies: usize) -> ExtraCanonicalTask {
        ExtraCanonicalTask { center, k, copies, reserved: 0, status: TaskStatus::Pending, placed: Vec::new() }
    }

    /// Keeps `c0..c{n-1}` out of the fresh choices.
    pub fn reserving(mut self, n: u32) -> ExtraCanonicalTask {
        self.reserved = n;
        self
    }

    pub fn placed(&self) -> &[Bound] {
        &self.placed
    }
}

impl Task for ExtraCanonicalTask {
    fn name(&self) -> String {
        format!("extra-canonical(c{}, 2^-{}, {})", self.center, self.k, self.copies)
    }

    fn status(&self) -> TaskStatus {
        self.status.clone()
    }

    fn step(&mut self, oracle: &Oracle, q: &Condition) -> Condition {
        let mut used = used_constants(q, &[self.center]);
        used.extend(0..self.reserved);
        let fresh = fresh_constants(&used, self.copies as u32);
        let r = Dyadic::pow2_inv(self.k);
        let adds: Vec<Bound> =
            fresh.iter().map(|&c| Bound::new(Formula::dist(Term::c(c), Term::c(self.center)), r)).collect();
        let out = play(oracle, q, &adds, &mut self.status, format!("placed {}", tuple_name(&fresh)));
        if self.status.is_done() {
            self.placed = adds;
        }
        out
    }

    fn verify(&self, last: &Condition) -> bool {
        self.placed.len() == self.copies && self.placed.iter().all(|b| last.contains(b))
    }
}

/// Plays `matrix(c) < r` for one instance of a universal axiom.
pub struct UniversalTask {
    pub bound: Bound,
    status: TaskStatus,
}

impl UniversalTask {
    /// `axiom` must be a `sup` block over a quantifier-free matrix.
    pub fn new(axiom: &Formula, tuple: &[u32], r: Dyadic) -> UniversalTask {
        let (vars, matrix) = strip_block(axiom, false);
        let bound = Bound::new(matrix.instantiate(&subst(&vars, tuple)), r);
        UniversalTask { bound, status: TaskStatus::Pending }
    }
}

impl Task for UniversalTask {
    fn name(&self) -> String {
        format!("universal[{}]", self.bound)
    }

    fn status(&self) -> TaskStatus {
        self.status.clone()
    }

    fn step(&mut self, oracle: &Oracle, q: &Condition) -> Condition {
        if q.contains(&self.bound) {
            self.status = TaskStatus::Done("already present".into());
            return q.clone();
        }
        let adds = [self.bound.clone()];
        play(oracle, q, &adds, &mut self.status, "played".into())
    }

    fn verify(&self, last: &Condition) -> bool {
        last.contains(&self.bound)
    }
}

/// Services `phi(c) < r` for `phi = inf y . psi(x, y)`: plays `psi(c, c') < r` or records that
/// no extension exists at the search bound.
pub struct EcTask {
    pub phi: Formula,
    pub tuple: Vec<u32>,
    pub r: Dyadic,
    ys: Vec<u32>,
    matrix: Formula,
    status: TaskStatus,
    played: Option<Bound>,
}

impl EcTask {
    /// `phi` must classify existential; its free variables are `x0..x{n-1}` for `n = tuple.len()`.
    pub fn new(phi: Formula, tuple: Vec<u32>, r: Dyadic) -> EcTask {
        let (ys, m) = strip_block(&phi, true);
        let xs: Vec<u32> = (0..tuple.len() as u32).collect();
        let matrix = m.instantiate(&subst(&xs, &tuple));
        EcTask { phi, tuple, r, ys, matrix, status: TaskStatus::Pending, played: None }
    }

    pub fn played(&self) -> Option<&Bound> {
        self.played.as_ref()
    }

    fn instance(&self, ws: &[u32]) -> Bound {
        Bound::new(self.matrix.instantiate(&subst(&self.ys, ws)), self.r)
    }

    /// Lowest existing constants whose witness elements already satisfy the matrix with slack.
    fn reuse(&self, oracle: &Oracle, w: &FiniteStructure) -> Option<Vec<u32>> {
        let slack = oracle.search.slack();
        if self.r <= slack || self.matrix.witnesses().iter().any(|c| !w.constants.contains_key(c)) {
            return None;
        }
        // One representative constant per named element.
        let mut reps: BTreeMap<usize, u32> = BTreeMap::new();
        for (&c, &e) in &w.constants {
            reps.entry(e).and_modify(|k| *k = (*k).min(c)).or_insert(c);
        }
        let mut named: Vec<(u32, usize)> = reps.into_iter().map(|(e, c)| (c, e)).collect();
        named.sort();
        let target = self.r.sub_sat(slack);
        let mut tried = 0;
        for combo in (0..self.ys.len()).map(|_| named.iter().copied()).multi_cartesian_product() {
            tried += 1;
            if tried > REUSE_LIMIT {
                return None;
            }
            let asg: Assignment = self.ys.iter().copied().zip(combo.iter().map(|&(_, e)| e)).collect();
            if matches!(eval(&self.matrix, w, &asg), Ok(v) if v <= target) {
                return Some(combo.iter().map(|&(c, _)| c).collect());
            }
        }
        None
    }
}

impl Task for EcTask {
    fn name(&self) -> String {
        format!("ec[{}]({}) < {}", self.phi, tuple_name(&self.tuple), self.r)
    }

    fn status(&self) -> TaskStatus {
        self.status.clone()
    }

    fn step(&mut self, oracle: &Oracle, q: &Condition) -> Condition {
        if let Some(w) = q.witness() {
            if let Some(ws) = self.reuse(oracle, w) {
                let b = self.instance(&ws);
                let out = play(oracle, q, std::slice::from_ref(&b), &mut self.status, format!("witness {}", tuple_name(&ws)));
                if self.status.is_done() {
                    self.played = Some(b);
                    return out;
                }
            }
        }
        let used = used_constants(q, &self.tuple);
        let fresh = fresh_constants(&used, self.ys.len() as u32);
        let b = self.instance(&fresh);
        match oracle.decide(q, std::slice::from_ref(&b)) {
            Ok((_, Some(c))) => {
                self.status = TaskStatus::Done(format!("fresh witness {}", tuple_name(&fresh)));
                self.played = Some(b);
                c
            }
            Ok((Verdict::UnsatAtBound(s), None)) => {
                self.status = TaskStatus::Done(format!(
                    "no extension: unsat at bound (N = {}, grid 2^-{})",
                    s.max_universe, s.grid_exp
                ));
                q.clone()
            }
            Ok((v, _)) => {
                self.status = TaskStatus::Flagged(format!("unserviced: {}", match v {
                    Verdict::Unknown(r) => r,
                    other => other.kind().to_string(),
                }));
                q.clone()
            }
            Err(e) => {
                self.status = TaskStatus::Flagged(e.to_string());
                q.clone()
            }
        }
    }

    fn verify(&self, last: &Condition) -> bool {
        self.played.as_ref().is_none_or(|b| last.contains(b))
    }
}

/// Serves one instance of a `sup x . join_n inf y . psi_n` sentence from a reference structure.
pub struct SupJoinInfTask {
    pub disjuncts: Vec<(Vec<u32>, Formula)>,
    pub tuple: Vec<u32>,
    pub r: Dyadic,
    references: Arc<Vec<FiniteStructure>>,
    label: String,
    status: TaskStatus,
    played: Option<Bound>,
}

/// Backtracking cap for embedding a condition into a reference structure.
const EMBED_NODES: u64 = 200_000;

impl SupJoinInfTask {
    pub fn new(sentence: &Formula, tuple: Vec<u32>, r: Dyadic, references: Arc<Vec<FiniteStructure>>) -> SupJoinInfTask {
        let (xs, body) = strip_block(sentence, false);
        let sub = subst(&xs, &tuple);
        let members = match body {
            Formula::Join(ms) => ms.clone(),
            other => vec![other.clone()],
        };
        let disjuncts = members
            .iter()
            .map(|m| {
                let (ys, psi) = strip_block(m, true);
                (ys, psi.instantiate(&sub))
            })
            .collect();
        SupJoinInfTask {
            disjuncts,
            tuple,
            r,
            references,
            label: sentence.to_string(),
            status: TaskStatus::Pending,
            played: None,
        }
    }

    /// An expansion of `r` by `q`'s constants satisfying every bound of `q` with slack.
    fn embed(oracle: &Oracle, q: &Condition, consts: &[u32], r: &FiniteStructure) -> Option<FiniteStructure> {
        let bounds: Vec<Bound> = q.canonical();
        // Each bound is checked once all of its constants are placed.
        let ready: Vec<Vec<&Bound>> = (0..consts.len())
            .map(|i| {
                let placed: BTreeSet<u32> = consts[..=i].iter().copied().collect();
                let prev: BTreeSet<u32> = consts[..i].iter().copied().collect();
                bounds
                    .iter()
                    .filter(|b| {
                        let ws = b.formula.witnesses();
                        ws.is_subset(&placed) && !ws.is_subset(&prev)
                    })
                    .collect()
            })
            .collect();
        let search = oracle.search;
        let mut s = r.clone();
        s.constants.clear();
        let mut nodes = 0u64;
        fn go(
            i: usize,
            consts: &[u32],
            ready: &[Vec<&Bound>],
            s: &mut FiniteStructure,
            nodes: &mut u64,
            search: &crate::oracle::SearchBounds,
        ) -> bool {
            if i == consts.len() {
                return true;
            }
            for e in 0..s.universe {
                *nodes += 1;
                if *nodes > EMBED_NODES {
                    return false;
                }
                s.constants.insert(consts[i], e);
                let owned: Vec<Bound> = ready[i].iter().map(|b| (*b).clone()).collect();
                if bounds_hold(&owned, search, s) && go(i + 1, consts, ready, s, nodes, search) {
                    return true;
                }
            }
            s.constants.remove(&consts[i]);
            false
        }
        if ready.is_empty() && !bounds.is_empty() {
            return bounds_hold(&bounds, &search, &s).then_some(s);
        }
        go(0, consts, &ready, &mut s, &mut nodes, &search).then_some(s)
    }
}

impl Task for SupJoinInfTask {
    fn name(&self) -> String {
        format!("sup-join-inf[{}]({}) < {}", self.label, tuple_name(&self.tuple), self.r)
    }

    fn status(&self) -> TaskStatus {
        self.status.clone()
    }

    fn step(&mut self, oracle: &Oracle, q: &Condition) -> Condition {
        let mut consts: Vec<u32> = q.constants().into_iter().chain(self.tuple.iter().copied()).collect();
        consts.sort();
        consts.dedup();
        let target = self.r.sub_sat(oracle.search.slack());
        let used: BTreeSet<u32> = consts.iter().copied().collect();
        for (ri, reference) in self.references.iter().enumerate() {
            let Some(expansion) = Self::embed(oracle, q, &consts, reference) else { continue };
            for (n, (ys, psi)) in self.disjuncts.iter().enumerate() {
                let fresh = fresh_constants(&used, ys.len() as u32);
                let b = Bound::new(psi.instantiate(&subst(ys, &fresh)), self.r);
                let found = (0..ys.len())
                    .map(|_| 0..expansion.universe)
                    .multi_cartesian_product()
                    .find(|es| {
                        let mut w = expansion.clone();
                        w.constants.extend(fresh.iter().copied().zip(es.iter().copied()));
                        matches!(eval_sentence(&b.formula, &w), Ok(v) if v <= target)
                    });
                let Some(es) = found else { continue };
                let mut w = expansion.clone();
                w.constants.extend(fresh.iter().copied().zip(es));
                let all: Vec<Bound> = q.bounds.iter().cloned().chain([b.clone()]).collect();
                let done = format!("disjunct {n} via reference {ri}");
                let next = if verify_witness(&oracle.theory, &all, &oracle.search, &w) {
                    self.status = TaskStatus::Done(done);
                    Condition { bounds: all.into_iter().collect(), cert: Certificate::Witness(w) }
                } else {
                    play(oracle, q, std::slice::from_ref(&b), &mut self.status, done)
                };
                if self.status.is_done() {
                    self.played = Some(b);
                    return next;
                }
            }
        }
        self.status = TaskStatus::Flagged("no reference expansion realizes the condition".into());
        q.clone()
    }

    fn verify(&self, last: &Condition) -> bool {
        self.played.as_ref().is_none_or(|b| last.contains(b))
    }
}

/// Narrows one sentence to an interval of width `< eps`.
pub struct FiniteGenericTask {
    pub phi: Formula,
    pub eps: Dyadic,
    status: TaskStatus,
    result: Option<(Vec<Bound>, Interval)>,
}

impl FiniteGenericTask {
    pub fn new(phi: Formula, eps: Dyadic) -> FiniteGenericTask {
        FiniteGenericTask { phi, eps, status: TaskStatus::Pending, result: None }
    }

    pub fn interval(&self) -> Option<Interval> {
        self.result.as_ref().map(|(_, i)| *i)
    }
}

impl Task for FiniteGenericTask {
    fn name(&self) -> String {
        format!("finite-generic[{}] width < {}", self.phi, self.eps)
    }

    fn status(&self) -> TaskStatus {
        self.status.clone()
    }

    fn step(&mut self, oracle: &Oracle, q: &Condition) -> Condition {
        match narrow(oracle, q, &self.phi, self.eps) {
            Ok((next, i)) => {
                self.status = TaskStatus::Done(format!("forced into {i}"));
                self.result = Some((next.added_over(q), i));
                next
            }
            Err(e) => {
                self.status = TaskStatus::Flagged(e.to_string());
                q.clone()
            }
        }
    }

    fn verify(&self, last: &Condition) -> bool {
        self.result.as_ref().is_none_or(|(adds, i)| i.width() < self.eps && adds.iter().all(|b| last.contains(b)))
    }
}

/// Forces a neighbourhood `theta(c) < eta` of an isolated type around the type of `c`.
pub struct EAtomicTask {
    pub tuple: Vec<u32>,
    pub delta: Dyadic,
    probe: Arc<dyn IsolationProbe>,
    status: TaskStatus,
    inner: Option<EcTask>,
}

impl EAtomicTask {
    pub fn new(tuple: Vec<u32>, delta: Dyadic, probe: Arc<dyn IsolationProbe>) -> EAtomicTask {
        EAtomicTask { tuple, delta, probe, status: TaskStatus::Pending, inner: None }
    }
}

impl Task for EAtomicTask {
    fn name(&self) -> String {
        format!("e-atomic({}) delta {}", tuple_name(&self.tuple), self.delta)
    }

    fn status(&self) -> TaskStatus {
        self.status.clone()
    }

    fn step(&mut self, oracle: &Oracle, q: &Condition) -> Condition {
        let Some(w) = q.witness() else {
            self.status = TaskStatus::Flagged("probe unknown: no witness to read the type from".into());
            return q.clone();
        };
        let elems: Option<Vec<usize>> = self.tuple.iter().map(|c| w.constants.get(c).copied()).collect();
        let pi = match elems.map(|es| etype_of(w, &oracle.theory.signature, &es, self.probe.depth())) {
            Some(Ok(pi)) => pi,
            _ => {
                // Uninterpreted constants have no type yet; place them first.
                let adds: Vec<Bound> = self
                    .tuple
                    .iter()
                    .filter(|c| !w.constants.contains_key(c))
                    .map(|&c| Bound::new(Formula::dist(Term::c(c), Term::c(c)), Dyadic::ONE))
                    .collect();
                return match oracle.certify(q, &adds) {
                    Ok(Some(c)) => c,
                    _ => {
                        self.status = TaskStatus::Flagged("could not interpret the tuple".into());
                        q.clone()
                    }
                };
            }
        };
        match self.probe.isolate(&oracle.theory, &pi, self.delta) {
            Isolation::Isolated { theta, eta, certificate } => {
                let mut ec = EcTask::new(theta, self.tuple.clone(), eta);
                let next = ec.step(oracle, q);
                self.status = match ec.status() {
                    TaskStatus::Done(d) => TaskStatus::Done(format!("{} < {eta}: {d}; {certificate}", ec.phi)),
                    other => other,
                };
                self.inner = Some(ec);
                next
            }
            Isolation::NotIsolatedAtBound { distance, .. } => {
                self.status = TaskStatus::Flagged(format!("probe: not isolated at bound (distance {distance})"));
                q.clone()
            }
            Isolation::Unknown { reason } => {
                self.status = TaskStatus::Flagged(format!("probe unknown: {reason}"));
                q.clone()
            }
        }
    }

    fn verify(&self, last: &Condition) -> bool {
        self.inner.as_ref().is_none_or(|t| t.verify(last))
    }
}

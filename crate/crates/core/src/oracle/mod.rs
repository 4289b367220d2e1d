//! Theories, conditions and the bounded satisfiability oracle.

pub mod condition;
pub mod pool;
mod search;
pub mod theory;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use condition::{Bound, Certificate, Condition, ConditionError, WireBound};
pub use pool::{move_pool, move_pool_focused, Pool, PoolBudget};
pub use theory::{Theory, TheoryError, TheoryPack};

use crate::dyadic::Dyadic;
use crate::structures::FiniteStructure;
use search::{Outcome, Request};

/// Limits of one witness search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchBounds {
    pub max_universe: usize,
    pub grid_exp: u32,
    pub node_budget: u64,
    /// Classical relational search: exhaustion is a sound unsatisfiability proof and the
    /// node budget is ignored.
    pub classical_exhaustive: bool,
}

impl SearchBounds {
    pub fn new(max_universe: usize, grid_exp: u32) -> SearchBounds {
        SearchBounds { max_universe, grid_exp, node_budget: 200_000, classical_exhaustive: false }
    }

    /// Defaults for a theory: 64 elements, grid `1/16`.
    pub fn for_theory(t: &Theory) -> SearchBounds {
        SearchBounds {
            max_universe: 64,
            grid_exp: 4,
            node_budget: 200_000,
            classical_exhaustive: t.classical() && t.signature.is_relational(),
        }
    }

    /// Strict bounds `phi < r` are witnessed by `phi <= r - slack`.
    pub fn slack(&self) -> Dyadic {
        Dyadic::pow2_inv(self.grid_exp)
    }

    pub fn with_budget(mut self, nodes: u64) -> SearchBounds {
        self.node_budget = nodes;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sat(FiniteStructure),
    UnsatAtBound(SearchBounds),
    Unknown(String),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "sat",
            Verdict::UnsatAtBound(_) => "unsat_at_bound",
            Verdict::Unknown(_) => "unknown",
        }
    }

    pub fn witness(&self) -> Option<&FiniteStructure> {
        match self {
            Verdict::Sat(w) => Some(w),
            _ => None,
        }
    }
}

/// What a game accepts as a legal move.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Only `Sat` extensions are conditions.
    #[default]
    Strict,
    /// `Unknown` extensions are accepted and flagged.
    Optimistic,
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Policy::Strict),
            "optimistic" => Ok(Policy::Optimistic),
            other => Err(format!("unknown policy `{other}` (expected strict or optimistic)")),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Strict => "strict",
            Policy::Optimistic => "optimistic",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

fn effective(search: &SearchBounds) -> SearchBounds {
    let mut s = *search;
    if s.classical_exhaustive {
        s.node_budget = u64::MAX;
    }
    s
}

fn verdict_of(out: Outcome, theory: &Theory, bounds: &[Bound], search: &SearchBounds) -> Verdict {
    match out {
        Outcome::Sat(s) => {
            debug_assert!(verify_witness(theory, bounds, search, &s), "unsound witness for {bounds:?}");
            Verdict::Sat(s)
        }
        Outcome::Exhausted => Verdict::UnsatAtBound(*search),
        Outcome::Incomplete(reason) => Verdict::Unknown(reason),
        Outcome::Budget => Verdict::Unknown("node budget exhausted".into()),
    }
}

/// Re-checks a witness: tables valid, axioms hold, every bound holds with slack.
pub fn verify_witness(theory: &Theory, bounds: &[Bound], search: &SearchBounds, s: &FiniteStructure) -> bool {
    s.validate(&theory.signature).is_ok() && theory.is_model(s) && bounds_hold(bounds, search, s)
}

/// Every bound holds in `s` with one grid step of slack.
pub fn bounds_hold(bounds: &[Bound], search: &SearchBounds, s: &FiniteStructure) -> bool {
    let slack = search.slack();
    bounds.iter().all(|b| {
        b.bound >= slack
            && matches!(crate::logic::eval::eval_sentence(&b.formula, s), Ok(v) if v <= b.bound.sub_sat(slack))
    })
}

/// Searches for a witness of `T ∪ p` within `search`.
pub fn check_condition(theory: &Theory, bounds: &[Bound], search: &SearchBounds) -> Result<Verdict, OracleError> {
    for b in bounds {
        b.validate()?;
    }
    let search = effective(search);
    let focus: BTreeSet<u32> = BTreeSet::new();
    let req = Request { theory, bounds, search: &search, seed: None, focus: &focus, local: false };
    Ok(verdict_of(search::run(&req), theory, bounds, &search))
}

/// Checks `p ∪ additions`, seeding the search with `p`'s witness.
pub fn extend_check(
    theory: &Theory,
    p: &Condition,
    additions: &[Bound],
    search: &SearchBounds,
) -> Result<Verdict, OracleError> {
    for b in additions {
        b.validate()?;
    }
    let search = effective(search);
    let all: Vec<Bound> = p.bounds.iter().chain(additions).cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let seed = p.witness();
    if let Some(w) = seed {
        let interpreted = additions.iter().flat_map(|b| b.formula.witnesses()).all(|c| w.constants.contains_key(&c));
        if interpreted && bounds_hold(additions, &search, w) {
            return Ok(Verdict::Sat(w.clone()));
        }
        let focus: BTreeSet<u32> = additions.iter().flat_map(|b| b.formula.witnesses()).collect();
        let local = Request { theory, bounds: &all, search: &search, seed, focus: &focus, local: true };
        if let Outcome::Sat(s) = search::run(&local) {
            return Ok(verdict_of(Outcome::Sat(s), theory, &all, &search));
        }
        let req = Request { theory, bounds: &all, search: &search, seed, focus: &focus, local: false };
        return Ok(verdict_of(search::run(&req), theory, &all, &search));
    }
    check_condition(theory, &all, &search)
}

/// SHA-256 over the printed bounds in canonical order.
fn digest(set: &BTreeSet<&Bound>) -> [u8; 32] {
    let mut h = Sha256::new();
    for b in set {
        h.update(b.text().as_bytes());
        h.update([0]);
        h.update(b.bound.to_string().as_bytes());
        h.update([0]);
    }
    h.finalize().into()
}

/// Memoising oracle bound to one theory, search limit and policy.
pub struct Oracle {
    pub theory: Theory,
    pub search: SearchBounds,
    pub policy: Policy,
    /// Keyed by the digest of the canonical bound set, so long games do not store every set.
    cache: Mutex<HashMap<[u8; 32], Verdict>>,
    calls: AtomicU64,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("theory", &self.theory.name)
            .field("search", &self.search)
            .field("policy", &self.policy)
            .finish()
    }
}

impl Oracle {
    pub fn new(theory: Theory, search: SearchBounds, policy: Policy) -> Oracle {
        Oracle { theory, search, policy, cache: Mutex::new(HashMap::new()), calls: AtomicU64::new(0) }
    }

    /// Oracle with the theory's default bounds and the strict policy.
    pub fn with_defaults(theory: Theory) -> Oracle {
        let search = SearchBounds::for_theory(&theory);
        Oracle::new(theory, search, Policy::Strict)
    }

    /// Number of searches actually run (cache misses).
    pub fn searches(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn cached(&self, key: &[u8; 32]) -> Option<Verdict> {
        self.cache.lock().expect("oracle cache poisoned").get(key).cloned()
    }

    fn store(&self, key: [u8; 32], v: &Verdict) {
        self.cache.lock().expect("oracle cache poisoned").insert(key, v.clone());
    }

    pub fn check(&self, bounds: &[Bound]) -> Result<Verdict, OracleError> {
        let set: BTreeSet<&Bound> = bounds.iter().collect();
        let key = digest(&set);
        if let Some(v) = self.cached(&key) {
            return Ok(v);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let sorted: Vec<Bound> = set.into_iter().cloned().collect();
        let v = check_condition(&self.theory, &sorted, &self.search)?;
        self.store(key, &v);
        Ok(v)
    }

    pub fn extend(&self, p: &Condition, additions: &[Bound]) -> Result<Verdict, OracleError> {
        let key = digest(&p.bounds.iter().chain(additions).collect());
        if let Some(v) = self.cached(&key) {
            return Ok(v);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let v = extend_check(&self.theory, p, additions, &self.search)?;
        self.store(key, &v);
        Ok(v)
    }

    /// Certifies `p ∪ additions` under the policy; `None` when it is not a condition.
    pub fn certify(&self, p: &Condition, additions: &[Bound]) -> Result<Option<Condition>, OracleError> {
        let verdict = self.extend(p, additions)?;
        Ok(self.condition_from(p.bounds.iter().chain(additions).cloned().collect(), verdict))
    }

    /// The verdict on `p ∪ additions` together with the condition it certifies, if any.
    pub fn decide(&self, p: &Condition, additions: &[Bound]) -> Result<(Verdict, Option<Condition>), OracleError> {
        let verdict = self.extend(p, additions)?;
        let cond = self.condition_from(p.bounds.iter().chain(additions).cloned().collect(), verdict.clone());
        Ok((verdict, cond))
    }

    /// Certifies a bound set from scratch.
    pub fn certify_bounds(&self, bounds: &[Bound]) -> Result<Option<Condition>, OracleError> {
        let verdict = self.check(bounds)?;
        Ok(self.condition_from(bounds.iter().cloned().collect(), verdict))
    }

    fn condition_from(&self, bounds: BTreeSet<Bound>, verdict: Verdict) -> Option<Condition> {
        match verdict {
            Verdict::Sat(w) => Some(Condition { bounds, cert: Certificate::Witness(w) }),
            Verdict::Unknown(reason) if self.policy == Policy::Optimistic => {
                Some(Condition { bounds, cert: Certificate::Assumed(reason) })
            }
            _ => None,
        }
    }

    /// The empty condition, certified by a model of the theory.
    pub fn root(&self) -> Condition {
        self.certify_bounds(&[])
            .expect("empty condition is well formed")
            .expect("theory has a finite model within the search bounds")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;

    fn b(t: &Theory, f: &str, r: &str) -> Bound {
        Bound::new(parse_formula(f, &t.signature).unwrap(), r.parse().unwrap())
    }

    #[test]
    fn single_edge_is_sat() {
        let t = Theory::graphs();
        let s = SearchBounds::for_theory(&t);
        let v = check_condition(&t, &[b(&t, "E(c0,c1)", "1/2")], &s).unwrap();
        let w = v.witness().expect("sat");
        assert_eq!(w.universe, 2);
    }

    #[test]
    fn loop_is_unsat() {
        let t = Theory::graphs();
        let s = SearchBounds::for_theory(&t);
        let v = check_condition(&t, &[b(&t, "E(c0,c0)", "1/2")], &s).unwrap();
        assert!(matches!(v, Verdict::UnsatAtBound(_)));
    }

    #[test]
    fn contradictory_distances() {
        let t = Theory::metric();
        let s = SearchBounds::for_theory(&t);
        let v = check_condition(&t, &[b(&t, "d(c0,c1)", "1/4"), b(&t, "~d(c0,c1)", "1/2")], &s).unwrap();
        assert!(matches!(v, Verdict::UnsatAtBound(_)));
    }

    #[test]
    fn extension_reuses_witness() {
        let t = Theory::metric();
        let o = Oracle::with_defaults(t.clone());
        let p = o.certify_bounds(&[b(&t, "d(c0,c1)", "1/4")]).unwrap().unwrap();
        let w = p.witness().unwrap().clone();
        let v = o.extend(&p, &[b(&t, "d(c0,c1)", "1/2")]).unwrap();
        assert_eq!(v.witness(), Some(&w));
        let v = o.extend(&p, &[b(&t, "~d(c0,c1)", "1/2")]).unwrap();
        assert!(matches!(v, Verdict::UnsatAtBound(_)));
    }

    #[test]
    fn path_without_chord() {
        let t = Theory::graphs();
        let o = Oracle::with_defaults(t.clone());
        let p = o.certify_bounds(&[b(&t, "E(c0,c1)", "1/2")]).unwrap().unwrap();
        let add = [b(&t, "E(c1,c2)", "1/2"), b(&t, "~E(c0,c2)", "1/2")];
        let v = o.extend(&p, &add).unwrap();
        let w = v.witness().expect("path is a graph");
        assert_eq!(w.universe, 3);
    }

    #[test]
    fn malformed_bound_rejected() {
        let t = Theory::metric();
        let s = SearchBounds::for_theory(&t);
        let bad = Bound::new(parse_formula("inf x0 . d(x0,c0)", &t.signature).unwrap(), Dyadic::HALF);
        assert!(check_condition(&t, &[bad], &s).is_err());
        let zero = Bound::new(parse_formula("d(c0,c1)", &t.signature).unwrap(), Dyadic::ZERO);
        assert!(check_condition(&t, &[zero], &s).is_err());
    }
}

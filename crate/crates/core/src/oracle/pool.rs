use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::condition::{Bound, Condition};
use super::{Oracle, OracleError};
use crate::dyadic::Dyadic;
use crate::logic::enumerate::distinct_atoms;
use crate::logic::formula::{Formula, Term};

/// Caps on the finite surrogate for "all extensions of p".
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PoolBudget {
    /// Fresh witness constants admitted beyond those already mentioned.
    pub fresh_constants: u32,
    /// Candidate atomic sentences.
    pub max_atoms: usize,
    pub thresholds: Vec<Dyadic>,
    /// Bounds added on top of `p` per member.
    pub max_additions: usize,
    /// Hard cap on the number of members.
    pub cap: usize,
    /// Draw atoms from the focus formulas only (keeps pools permutation-equivariant).
    #[serde(default)]
    pub focus_only: bool,
}

impl PoolBudget {
    /// Only the identity extension.
    pub fn identity() -> PoolBudget {
        PoolBudget { fresh_constants: 0, max_atoms: 0, thresholds: vec![], max_additions: 0, cap: 1, focus_only: false }
    }

    pub fn new(max_atoms: usize, thresholds: Vec<Dyadic>, max_additions: usize, cap: usize) -> PoolBudget {
        PoolBudget { fresh_constants: 0, max_atoms, thresholds, max_additions, cap, focus_only: false }
    }

    pub fn with_fresh(mut self, n: u32) -> PoolBudget {
        self.fresh_constants = n;
        self
    }

    pub fn focused(mut self) -> PoolBudget {
        self.focus_only = true;
        self
    }
}

/// A finite family of certified extensions of a base condition.
#[derive(Clone, Debug)]
pub struct Pool {
    /// First member is the base condition itself.
    pub members: Vec<Condition>,
    /// The cap cut the enumeration short.
    pub truncated: bool,
    /// Witness constants available to quantifier instantiation.
    pub window: Vec<u32>,
}

/// Lowest witness indices not in `used`.
pub fn fresh_constants(used: &BTreeSet<u32>, n: u32) -> Vec<u32> {
    (0..).filter(|c| !used.contains(c)).take(n as usize).collect()
}

/// Ground instances of the atoms of `f` with bound variables ranging over `window`.
pub fn ground_atoms(f: &Formula, window: &[u32]) -> Vec<Formula> {
    let mut out = Vec::new();
    for atom in f.atoms() {
        let vars: Vec<u32> = atom.free_vars().into_iter().collect();
        if vars.is_empty() {
            out.push(atom);
            continue;
        }
        for t in (0..vars.len()).map(|_| window.iter().copied()).multi_cartesian_product() {
            let map: BTreeMap<u32, Term> = vars.iter().copied().zip(t.into_iter().map(Term::c)).collect();
            out.push(atom.instantiate(&map));
        }
    }
    out
}

/// The instantiation window for `p` and the focus formulas.
pub fn window_for(p: &Condition, focus: &[Formula], fresh: u32) -> Vec<u32> {
    let mut used = p.constants();
    for f in focus {
        used.extend(f.witnesses());
    }
    let mut w: Vec<u32> = used.iter().copied().collect();
    w.extend(fresh_constants(&used, fresh));
    w.sort_unstable();
    w
}

/// Candidate single bounds: atoms of the focus formulas first, then every distinct atom over
/// the window, each as `atom < t` and `~atom < t`.
pub fn candidates(oracle: &Oracle, p: &Condition, budget: &PoolBudget, focus: &[Formula]) -> (Vec<Bound>, Vec<u32>) {
    let window = window_for(p, focus, budget.fresh_constants);
    let mut atoms: Vec<Formula> = Vec::new();
    let mut seen = BTreeSet::new();
    let terms: Vec<Term> = window.iter().map(|&c| Term::c(c)).collect();
    let focused = focus.iter().flat_map(|f| ground_atoms(f, &window));
    let filler = if budget.focus_only { vec![] } else { distinct_atoms(&oracle.theory.signature, &terms) };
    for a in focused.chain(filler) {
        if atoms.len() >= budget.max_atoms {
            break;
        }
        if seen.insert(a.clone()) {
            atoms.push(a);
        }
    }
    let mut out = Vec::new();
    for a in &atoms {
        for &t in &budget.thresholds {
            for f in [a.clone(), a.clone().neg()] {
                let b = Bound::new(f, t);
                if !p.contains(&b) {
                    out.push(b);
                }
            }
        }
    }
    (out, window)
}

pub fn move_pool(oracle: &Oracle, p: &Condition, budget: &PoolBudget) -> Result<Pool, OracleError> {
    move_pool_focused(oracle, p, budget, &[])
}

/// Every certified `p ∪ S` with `S` a set of at most `max_additions` candidates, up to `cap`.
///
/// Supersets of uncertified sets are skipped. Members are ordered by the canonical encoding of
/// their added bounds, so the identity comes first.
pub fn move_pool_focused(
    oracle: &Oracle,
    p: &Condition,
    budget: &PoolBudget,
    focus: &[Formula],
) -> Result<Pool, OracleError> {
    let (cands, window) = candidates(oracle, p, budget, focus);
    let mut members = vec![(Vec::new(), p.clone())];
    let mut truncated = false;
    let cap = budget.cap.max(1);
    grow(oracle, &cands, budget.max_additions, cap, 0, &mut Vec::new(), p, &mut members, &mut truncated)?;
    members.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(Pool { members: members.into_iter().map(|(_, q)| q).collect(), truncated, window })
}

#[allow(clippy::too_many_arguments)]
fn grow(
    oracle: &Oracle,
    cands: &[Bound],
    max_add: usize,
    cap: usize,
    start: usize,
    chosen: &mut Vec<Bound>,
    q: &Condition,
    out: &mut Vec<(Vec<Bound>, Condition)>,
    truncated: &mut bool,
) -> Result<(), OracleError> {
    if chosen.len() >= max_add {
        return Ok(());
    }
    for i in start..cands.len() {
        if *truncated {
            return Ok(());
        }
        let Some(next) = oracle.certify(q, std::slice::from_ref(&cands[i]))? else { continue };
        if out.len() >= cap {
            *truncated = true;
            return Ok(());
        }
        chosen.push(cands[i].clone());
        let mut key = chosen.clone();
        key.sort();
        out.push((key, next.clone()));
        grow(oracle, cands, max_add, cap, i + 1, chosen, &next, out, truncated)?;
        chosen.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Theory;

    #[test]
    fn identity_budget_gives_base_only() {
        let o = Oracle::with_defaults(Theory::metric());
        let p = o.root();
        let pool = move_pool(&o, &p, &PoolBudget::identity()).unwrap();
        assert_eq!(pool.members, vec![p]);
        assert!(!pool.truncated);
    }

    #[test]
    fn one_metric_atom_two_members() {
        let o = Oracle::with_defaults(Theory::metric());
        let d = Formula::dist(Term::c(0), Term::c(1));
        let pool = move_pool_focused(&o, &o.root(), &PoolBudget::new(1, vec![Dyadic::HALF], 2, 16), &[d]).unwrap();
        assert_eq!(pool.members.len(), 3);
    }
}

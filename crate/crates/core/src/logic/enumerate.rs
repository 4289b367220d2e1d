//! Canonical enumeration of small restricted sentences.

use std::collections::BTreeSet;

use itertools::Itertools;

use super::formula::{Formula, Term};
use super::signature::Signature;

/// Atomic formulas over `terms`, dropping reflexive and mirrored instances of binary symbols.
///
/// Mirrored and reflexive atoms are fixed by symmetry and reflexivity axioms, so they carry
/// no extra information in the graph and metric packs.
pub fn distinct_atoms(sig: &Signature, terms: &[Term]) -> Vec<Formula> {
    let mut out = Vec::new();
    for p in &sig.predicates {
        if p.arity == 2 {
            for (i, a) in terms.iter().enumerate() {
                for b in &terms[i + 1..] {
                    out.push(Formula::atom(&p.name, vec![a.clone(), b.clone()]));
                }
            }
        } else {
            for args in (0..p.arity).map(|_| terms.iter().cloned()).multi_cartesian_product() {
                out.push(Formula::atom(&p.name, args));
            }
        }
    }
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            out.push(Formula::dist(a.clone(), b.clone()));
        }
    }
    out
}

/// Restricted formulas of connective depth `<= depth` over the given constants.
///
/// `vars` are the variables in scope (usable in atoms); quantifiers bind `x{next}` one at a
/// time up to `max_vars`. `DotPlus` operands are ordered (left `<=` right) since truncated
/// addition is commutative in value. The output is sorted and duplicate-free.
pub fn formulas(sig: &Signature, constants: &[u32], depth: usize, max_vars: u32) -> Vec<Formula> {
    let mut set = BTreeSet::new();
    build(sig, constants, depth, &[], max_vars, &mut set);
    set.into_iter().filter(Formula::is_sentence).collect()
}

fn build(sig: &Signature, constants: &[u32], depth: usize, scope: &[u32], max_vars: u32, out: &mut BTreeSet<Formula>) {
    let mut terms: Vec<Term> = constants.iter().map(|&c| Term::c(c)).collect();
    terms.extend(scope.iter().map(|&v| Term::var(v)));
    let mut layers: Vec<Vec<Formula>> = vec![distinct_atoms(sig, &terms)];
    for d in 1..=depth {
        let mut layer = BTreeSet::new();
        let below: Vec<&Formula> = layers.iter().flatten().collect();
        let last: &Vec<Formula> = &layers[d - 1];
        for f in last {
            layer.insert(f.clone().neg());
            layer.insert(f.clone().half());
        }
        for (i, a) in below.iter().enumerate() {
            for b in &below[i..] {
                if a.depth() == d - 1 || b.depth() == d - 1 {
                    let (l, r) = if a <= b { (a, b) } else { (b, a) };
                    layer.insert((*l).clone().dot_plus((*r).clone()));
                }
            }
        }
        let next = scope.len() as u32;
        if next < max_vars {
            let mut inner_scope = scope.to_vec();
            inner_scope.push(next);
            let mut bodies = BTreeSet::new();
            build(sig, constants, d - 1, &inner_scope, max_vars, &mut bodies);
            for body in bodies.into_iter().filter(|b| b.free_vars().contains(&next) && b.depth() == d - 1) {
                layer.insert(Formula::sup(next, body.clone()));
                layer.insert(Formula::inf(next, body));
            }
        }
        layers.push(layer.into_iter().collect());
    }
    out.extend(layers.into_iter().flatten());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_is_atoms() {
        let f = formulas(&Signature::graphs(), &[0, 1, 2], 0, 1);
        assert_eq!(f.len(), 6);
    }

    #[test]
    fn enumeration_is_sentences_within_depth() {
        let f = formulas(&Signature::graphs(), &[0, 1], 2, 1);
        assert!(f.iter().all(|g| g.is_sentence() && g.depth() <= 2));
        assert!(f.iter().any(|g| matches!(g, Formula::Inf(..))));
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::narrow::{bound_interval, narrow_in};
use super::{check_sentence, report_on, ForcingBudget, ForcingError, Interval, Kind, World};
use crate::dyadic::Dyadic;
use crate::game::CompiledApprox;
use crate::logic::eval::eval_sentence;
use crate::logic::formula::Formula;
use crate::oracle::pool::fresh_constants;
use crate::oracle::{Condition, Oracle};

/// One scheduled sentence together with what the chain achieved for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Serviced {
    #[serde(serialize_with = "crate::game::compile::ser_formula")]
    pub formula: Formula,
    pub j: u32,
    /// Interval returned by narrowing.
    pub interval: Interval,
    /// `F_q(phi).hi + F_q(~phi).hi` at the servicing member.
    pub gap: Dyadic,
    /// Index into the chain of the member that serviced it.
    pub member: usize,
}

/// An increasing chain of conditions built by servicing a finite sentence schedule.
#[derive(Clone, Debug)]
pub struct GenericChain {
    pub chain: Vec<Condition>,
    pub schedule: Vec<Formula>,
    pub serviced: Vec<Serviced>,
    /// Constants used to instantiate quantifiers throughout the chain.
    pub window: Vec<u32>,
}

impl GenericChain {
    pub fn last(&self) -> &Condition {
        self.chain.last().expect("chain holds the seed")
    }

    pub fn is_chain(&self) -> bool {
        self.chain.windows(2).all(|w| w[1].extends(&w[0]))
    }

    pub fn serviced_for(&self, phi: &Formula) -> Option<&Serviced> {
        self.serviced.iter().find(|s| &s.formula == phi)
    }

    /// Gap requirement `gap < 1 + 2^-j` for every serviced sentence.
    pub fn gaps_hold(&self) -> bool {
        self.serviced.iter().all(|s| s.gap < Dyadic::ONE.add(Dyadic::pow2_inv(s.j)))
    }
}

/// Services each scheduled sentence by narrowing it to width `< 2^-j`.
///
/// Quantifiers are instantiated over one window shared by the whole chain: the seed's constants
/// together with those of every scheduled sentence. Gaps are strong values over the world spanned
/// by `budget` at the servicing member.
pub fn build_generic(
    oracle: &Oracle,
    seed: &Condition,
    schedule: &[Formula],
    j: u32,
    budget: &ForcingBudget,
) -> Result<GenericChain, ForcingError> {
    let eps = Dyadic::pow2_inv(j);
    let mut window: BTreeSet<u32> = seed.constants();
    for phi in schedule {
        check_sentence(phi)?;
        window.extend(phi.witnesses());
    }
    if window.is_empty() {
        window.extend(fresh_constants(&window, 1));
    }
    let window: Vec<u32> = window.into_iter().collect();
    let mut chain = vec![seed.clone()];
    let mut serviced = Vec::new();
    for phi in schedule {
        let last = chain.last().expect("nonempty").clone();
        let (q, interval) = narrow_in(oracle, &last, phi, eps, &window)?;
        if q != last {
            chain.push(q);
        }
        let member = chain.len() - 1;
        let gap = genericity_gap(oracle, &chain[member], phi, budget)?;
        serviced.push(Serviced { formula: phi.clone(), j, interval, gap, member });
    }
    Ok(GenericChain { chain, schedule: schedule.to_vec(), serviced, window })
}

/// `F_q(phi).hi + F_q(~phi).hi` over the world spanned by `budget` at `q`.
pub fn genericity_gap(oracle: &Oracle, q: &Condition, phi: &Formula, budget: &ForcingBudget) -> Result<Dyadic, ForcingError> {
    let neg = phi.clone().neg();
    let world = World::build(oracle, q, budget, std::slice::from_ref(phi))?;
    let exhaustive = oracle.search.classical_exhaustive;
    let a = report_on(&world, 0, phi, budget, Kind::Strong, exhaustive).interval.hi;
    let b = report_on(&world, 0, &neg, budget, Kind::Strong, exhaustive).interval.hi;
    Ok(a.add(b))
}

/// Reads the chain's last member as a finite approximation of the generic model.
///
/// Atomic tracked sentences get the interval forced by the bounds of the last member; others
/// keep their narrowing interval.
pub fn compile_generic_model(g: &GenericChain, tracked: &[Formula]) -> Result<CompiledApprox, ForcingError> {
    let last = g.last();
    let witness = last
        .witness()
        .cloned()
        .ok_or_else(|| ForcingError::Narrowing("last chain member carries no witness".into()))?;
    let mut values = BTreeMap::new();
    let mut definitive = BTreeMap::new();
    let mut eps = Dyadic::ONE;
    for phi in tracked {
        let s = g.serviced_for(phi).ok_or_else(|| ForcingError::Unserviced(phi.to_string()))?;
        let tol = Dyadic::pow2_inv(s.j);
        eps = eps.min(tol);
        let interval = if phi.is_atomic() { bound_interval(last, phi) } else { s.interval };
        let v = eval_sentence(phi, &witness).map_err(|e| ForcingError::Narrowing(e.to_string()))?;
        debug_assert!(interval.contains(v), "witness value {v} escapes {interval} for {phi}");
        definitive.insert(phi.clone(), interval.width() < tol);
        values.insert(phi.clone(), interval);
    }
    Ok(CompiledApprox { constants: last.constants(), values, definitive, witness, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;
    use crate::oracle::{Policy, SearchBounds, Theory};

    #[test]
    fn empty_schedule_is_seed() {
        let o = Oracle::with_defaults(Theory::graphs());
        let g = build_generic(&o, &o.root(), &[], 3, &ForcingBudget::identity(2)).unwrap();
        assert_eq!(g.chain, vec![o.root()]);
    }

    #[test]
    fn one_atom_chain() {
        // Interior witness values need a slack below eps / 2.
        let o = Oracle::new(Theory::metric(), SearchBounds::new(8, 5), Policy::Strict);
        let d = parse_formula("d(c0,c1)", &o.theory.signature).unwrap();
        let g = build_generic(&o, &o.root(), std::slice::from_ref(&d), 3, &ForcingBudget::identity(2)).unwrap();
        assert!(g.chain.len() <= 2);
        assert!(g.serviced[0].interval.width() < Dyadic::pow2_inv(3));
        let c = compile_generic_model(&g, std::slice::from_ref(&d)).unwrap();
        assert!(c.values[&d].width() < Dyadic::pow2_inv(3));
    }
}

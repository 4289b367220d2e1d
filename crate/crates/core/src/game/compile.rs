use std::collections::{BTreeMap, BTreeSet};

use serde::{Serialize, Serializer};
use thiserror::Error;

use super::transcript::Transcript;
use crate::dyadic::Dyadic;
use crate::forcing::{bound_interval, Interval};
use crate::logic::eval::eval_sentence;
use crate::logic::formula::Formula;
use crate::oracle::Condition;
use crate::structures::{FiniteStructure, StructureFile};

pub(crate) fn ser_formula<S: Serializer>(f: &Formula, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&f.to_string())
}

/// A finite-precision stand-in for the compiled structure of a play.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledApprox {
    pub constants: BTreeSet<u32>,
    pub values: BTreeMap<Formula, Interval>,
    /// Width within the tolerance, per tracked sentence.
    pub definitive: BTreeMap<Formula, bool>,
    pub witness: FiniteStructure,
    pub eps: Dyadic,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompiledEntry {
    pub formula: String,
    pub interval: Interval,
    pub definitive: bool,
    pub value: Option<Dyadic>,
}

/// Report document for a compiled approximation.
#[derive(Clone, Debug, Serialize)]
pub struct CompiledReport {
    pub constants: Vec<u32>,
    pub eps: Dyadic,
    pub entries: Vec<CompiledEntry>,
    pub witness: StructureFile,
}

impl CompiledApprox {
    pub fn interval(&self, phi: &Formula) -> Option<Interval> {
        self.values.get(phi).copied()
    }

    /// Value of a sentence in the witness.
    pub fn value(&self, phi: &Formula) -> Option<Dyadic> {
        eval_sentence(phi, &self.witness).ok()
    }

    /// Element interpreting constant `c`.
    pub fn element(&self, c: u32) -> Option<usize> {
        self.witness.constants.get(&c).copied()
    }

    pub fn report(&self) -> CompiledReport {
        CompiledReport {
            constants: self.constants.iter().copied().collect(),
            eps: self.eps,
            entries: self
                .values
                .iter()
                .map(|(f, i)| CompiledEntry {
                    formula: f.to_string(),
                    interval: *i,
                    definitive: self.definitive.get(f).copied().unwrap_or(false),
                    value: self.value(f),
                })
                .collect(),
            witness: StructureFile::from(&self.witness),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("tracked sentences not definitive: {}", .0.join(", "))]
    NotDefinitive(Vec<String>),
    #[error("tracked sentence `{0}` is not atomic")]
    NotAtomic(String),
    #[error("final condition carries no witness structure")]
    NoWitness,
}

/// Every tracked sentence's bound-derived interval at `q` has width `<= eps`.
pub fn definitive_at(q: &Condition, tracked: &[Formula], eps: Dyadic) -> bool {
    tracked.iter().all(|a| bound_interval(q, a).width() <= eps)
}

pub fn definitive_check(t: &Transcript, tracked: &[Formula], eps: Dyadic) -> bool {
    definitive_at(t.last(), tracked, eps)
}

pub fn compile(t: &Transcript, tracked: &[Formula], eps: Dyadic) -> Result<CompiledApprox, CompileError> {
    compile_condition(t.last(), tracked, eps)
}

/// Compiles the bounds of `q` on the tracked atomic sentences.
///
/// Fails listing the tracked sentences whose interval is wider than `eps`.
pub fn compile_condition(q: &Condition, tracked: &[Formula], eps: Dyadic) -> Result<CompiledApprox, CompileError> {
    if let Some(a) = tracked.iter().find(|a| !a.is_atomic() || !a.is_sentence()) {
        return Err(CompileError::NotAtomic(a.to_string()));
    }
    let loose: Vec<String> =
        tracked.iter().filter(|a| bound_interval(q, a).width() > eps).map(|a| a.to_string()).collect();
    if !loose.is_empty() {
        return Err(CompileError::NotDefinitive(loose));
    }
    compile_loose(q, tracked, eps)
}

/// As [`compile_condition`] without the definitiveness precondition; loose sentences are
/// marked non-definitive.
pub fn compile_loose(q: &Condition, tracked: &[Formula], eps: Dyadic) -> Result<CompiledApprox, CompileError> {
    let witness = q.witness().cloned().ok_or(CompileError::NoWitness)?;
    let mut values = BTreeMap::new();
    let mut definitive = BTreeMap::new();
    for a in tracked {
        let i = bound_interval(q, a);
        definitive.insert(a.clone(), i.width() <= eps);
        values.insert(a.clone(), i);
    }
    Ok(CompiledApprox { constants: q.constants(), values, definitive, witness, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;
    use crate::oracle::{Bound, Oracle, Policy, SearchBounds, Theory};

    #[test]
    fn definitive_examples() {
        let o = Oracle::new(Theory::metric(), SearchBounds::new(8, 5), Policy::Strict);
        let d = parse_formula("d(c0,c1)", &o.theory.signature).unwrap();
        let t = Transcript::new(0, o.root());
        assert!(definitive_check(&t, &[], Dyadic::pow2_inv(3)));
        assert!(!definitive_check(&t, std::slice::from_ref(&d), Dyadic::HALF));
        let q = o
            .certify_bounds(&[
                Bound::new(d.clone(), "3/16".parse().unwrap()),
                Bound::new(d.clone().neg(), "7/8".parse().unwrap()),
            ])
            .unwrap()
            .unwrap();
        let t = Transcript::new(0, q);
        assert!(definitive_check(&t, std::slice::from_ref(&d), Dyadic::pow2_inv(3)));
        let c = compile(&t, std::slice::from_ref(&d), Dyadic::pow2_inv(3)).unwrap();
        assert!(c.interval(&d).unwrap().contains(c.value(&d).unwrap()));
    }

    #[test]
    fn empty_tracked_is_witness_only() {
        let o = Oracle::with_defaults(Theory::graphs());
        let c = compile(&Transcript::new(0, o.root()), &[], Dyadic::HALF).unwrap();
        assert!(c.values.is_empty());
    }
}

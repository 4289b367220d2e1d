use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::classify::{is_restricted, is_universal};
use crate::logic::derived::dot_minus;
use crate::logic::eval::eval_sentence;
use crate::logic::formula::{Formula, Term};
use crate::logic::parse::{parse_formula, ParseError};
use crate::logic::signature::{Signature, SignatureError};
use crate::structures::{FiniteStructure, StructureError, StructureFile};

/// A universal theory: every axiom `sigma` is read as the closed condition `sigma = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theory {
    pub name: String,
    pub signature: Signature,
    pub axioms: Vec<Formula>,
    pub reference_structures: Vec<FiniteStructure>,
}

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error("axiom {index}: {source}")]
    Parse { index: usize, source: ParseError },
    #[error("axiom `{0}` is not a universal restricted sentence")]
    NotUniversal(String),
    #[error("reference structure {index}: {message}")]
    Reference { index: usize, message: String },
    #[error("malformed theory pack: {0}")]
    Format(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// JSON theory pack.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoryPack {
    #[serde(default)]
    pub name: String,
    pub signature: Signature,
    #[serde(default)]
    pub axioms: Vec<String>,
    #[serde(default)]
    pub classical: bool,
    #[serde(default)]
    pub reference_structures: Vec<StructureFile>,
}

impl Theory {
    pub fn new(name: &str, signature: Signature, axioms: Vec<Formula>) -> Result<Theory, TheoryError> {
        signature.validate()?;
        for a in &axioms {
            if !(a.is_sentence() && a.witnesses().is_empty() && is_restricted(a) && is_universal(a)) {
                return Err(TheoryError::NotUniversal(a.to_string()));
            }
        }
        Ok(Theory { name: name.to_string(), signature, axioms, reference_structures: Vec::new() })
    }

    /// Adds reference models; each must validate and satisfy every axiom.
    pub fn with_references(mut self, refs: Vec<FiniteStructure>) -> Result<Theory, TheoryError> {
        for (index, r) in refs.iter().enumerate() {
            r.validate(&self.signature)
                .map_err(|v| TheoryError::Reference { index, message: v.to_string() })?;
            if !self.is_model(r) {
                return Err(TheoryError::Reference { index, message: "violates an axiom".into() });
            }
        }
        self.reference_structures = refs;
        Ok(self)
    }

    pub fn classical(&self) -> bool {
        self.signature.classical
    }

    pub fn is_model(&self, a: &FiniteStructure) -> bool {
        self.axioms.iter().all(|ax| matches!(eval_sentence(ax, a), Ok(v) if v.is_zero()))
    }

    /// Metric signature, no axioms.
    pub fn metric() -> Theory {
        Theory::new("metric", Signature::metric_only(), vec![]).expect("builtin pack")
    }

    /// Classical simple graphs: `E(x,y) = 0` is an edge; irreflexive and symmetric.
    pub fn graphs() -> Theory {
        Theory::new("graphs", Signature::graphs(), graph_axioms()).expect("builtin pack")
    }

    /// Looks up a builtin pack by name.
    pub fn builtin(name: &str) -> Option<Theory> {
        match name {
            "metric" => Some(Theory::metric()),
            "graphs" => Some(Theory::graphs()),
            _ => None,
        }
    }

    pub fn from_pack(pack: TheoryPack) -> Result<Theory, TheoryError> {
        let mut signature = pack.signature;
        signature.classical |= pack.classical;
        let mut axioms = Vec::new();
        for (index, text) in pack.axioms.iter().enumerate() {
            axioms.push(parse_formula(text, &signature).map_err(|source| TheoryError::Parse { index, source })?);
        }
        let refs = pack
            .reference_structures
            .into_iter()
            .map(FiniteStructure::try_from)
            .collect::<Result<Vec<_>, _>>()?;
        Theory::new(&pack.name, signature, axioms)?.with_references(refs)
    }

    pub fn from_json(text: &str) -> Result<Theory, TheoryError> {
        let pack: TheoryPack = serde_json::from_str(text).map_err(|e| TheoryError::Format(e.to_string()))?;
        Theory::from_pack(pack)
    }

    pub fn to_pack(&self) -> TheoryPack {
        TheoryPack {
            name: self.name.clone(),
            signature: self.signature.clone(),
            axioms: self.axioms.iter().map(|a| a.to_string()).collect(),
            classical: self.classical(),
            reference_structures: self.reference_structures.iter().map(StructureFile::from).collect(),
        }
    }
}

/// `sup x0 . ~E(x0,x0)` and `sup x0 . sup x1 . E(x1,x0) -. E(x0,x1)`.
pub fn graph_axioms() -> Vec<Formula> {
    let e = |a: u32, b: u32| Formula::atom("E", vec![Term::var(a), Term::var(b)]);
    vec![
        Formula::sup(0, e(0, 0).neg()),
        Formula::sup(0, Formula::sup(1, dot_minus(e(1, 0), e(0, 1)))),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_packs_round_trip() {
        for t in [Theory::metric(), Theory::graphs()] {
            let text = serde_json::to_string(&t.to_pack()).unwrap();
            assert_eq!(Theory::from_json(&text).unwrap(), t);
        }
    }

    #[test]
    fn non_universal_axiom_rejected() {
        let sig = Signature::metric_only();
        let ax = parse_formula("inf x0 . d(x0,x0)", &sig).unwrap();
        assert!(matches!(Theory::new("bad", sig, vec![ax]), Err(TheoryError::NotUniversal(_))));
    }
}

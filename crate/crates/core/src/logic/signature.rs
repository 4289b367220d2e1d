use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the distinguished metric symbol.
pub const METRIC: &str = "d";

const RESERVED: &[&str] = &["d", "sup", "inf", "half", "join", "meet"];

/// A predicate or function symbol with its Lipschitz modulus `delta(eps) = eps / L`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
    #[serde(default = "default_lipschitz")]
    pub lipschitz: u64,
}

fn default_lipschitz() -> u64 {
    1
}

impl Symbol {
    pub fn new(name: impl Into<String>, arity: usize) -> Symbol {
        Symbol { name: name.into(), arity, lipschitz: 1 }
    }

    pub fn with_lipschitz(mut self, l: u64) -> Symbol {
        self.lipschitz = l;
        self
    }
}

/// A one-sorted bounded signature. The metric `d` is implicit and always present.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    #[serde(default)]
    pub predicates: Vec<Symbol>,
    #[serde(default)]
    pub functions: Vec<Symbol>,
    /// All values (metric included) restricted to `{0, 1}`.
    #[serde(default)]
    pub classical: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("symbol `{0}` declared twice")]
    Duplicate(String),
    #[error("symbol name `{0}` is reserved")]
    Reserved(String),
    #[error("symbol name `{0}` collides with constant/variable naming")]
    Shadowed(String),
    #[error("symbol `{0}` must have a positive Lipschitz constant")]
    ZeroModulus(String),
}

fn looks_indexed(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('c') | Some('x'))
        && name.len() > 1
        && chars.all(|c| c.is_ascii_digit())
}

impl Signature {
    /// Signature with no symbols besides the metric.
    pub fn metric_only() -> Signature {
        Signature { predicates: vec![], functions: vec![], classical: false }
    }

    /// Classical graphs: one binary edge predicate `E`.
    pub fn graphs() -> Signature {
        Signature { predicates: vec![Symbol::new("E", 2)], functions: vec![], classical: true }
    }

    pub fn validate(&self) -> Result<(), SignatureError> {
        let mut seen = BTreeSet::new();
        for s in self.predicates.iter().chain(&self.functions) {
            if RESERVED.contains(&s.name.as_str()) {
                return Err(SignatureError::Reserved(s.name.clone()));
            }
            if looks_indexed(&s.name) {
                return Err(SignatureError::Shadowed(s.name.clone()));
            }
            if s.lipschitz == 0 {
                return Err(SignatureError::ZeroModulus(s.name.clone()));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(SignatureError::Duplicate(s.name.clone()));
            }
        }
        Ok(())
    }

    pub fn predicate(&self, name: &str) -> Option<&Symbol> {
        self.predicates.iter().find(|s| s.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&Symbol> {
        self.functions.iter().find(|s| s.name == name)
    }

    /// True when every function symbol is a constant (arity 0).
    pub fn is_relational(&self) -> bool {
        self.functions.iter().all(|f| f.arity == 0)
    }

    pub fn signature_constants(&self) -> impl Iterator<Item = &Symbol> {
        self.functions.iter().filter(|f| f.arity == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_names() {
        let mut s = Signature::graphs();
        s.predicates.push(Symbol::new("E", 1));
        assert_eq!(s.validate(), Err(SignatureError::Duplicate("E".into())));
        let s = Signature { predicates: vec![Symbol::new("d", 2)], ..Signature::metric_only() };
        assert!(matches!(s.validate(), Err(SignatureError::Reserved(_))));
        let s = Signature { functions: vec![Symbol::new("c3", 0)], ..Signature::metric_only() };
        assert!(matches!(s.validate(), Err(SignatureError::Shadowed(_))));
        assert!(Signature::graphs().validate().is_ok());
    }
}

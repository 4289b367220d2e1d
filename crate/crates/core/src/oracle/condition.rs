use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{Dyadic, DyadicError};
use crate::logic::classify::{is_quantifier_free, is_restricted};
use crate::logic::formula::Formula;
use crate::logic::parse::{parse_formula, ParseError};
use crate::logic::signature::Signature;
use crate::structures::FiniteStructure;

/// A strict upper bound `formula < bound`.
#[derive(Clone, Debug)]
pub struct Bound {
    /// Shared so that the conditions of a long transcript do not copy formula trees.
    pub formula: Arc<Formula>,
    pub bound: Dyadic,
    key: Arc<str>,
}

impl Bound {
    pub fn new(formula: Formula, bound: Dyadic) -> Bound {
        let key = formula.to_string().into();
        Bound { formula: Arc::new(formula), bound, key }
    }

    /// Printed formula, the primary sort key.
    pub fn text(&self) -> &str {
        &self.key
    }

    /// Checks the member invariants of a condition.
    pub fn validate(&self) -> Result<(), ConditionError> {
        if !(is_quantifier_free(&self.formula) && is_restricted(&self.formula) && self.formula.is_sentence()) {
            return Err(ConditionError::NotQuantifierFree(self.key.to_string()));
        }
        if self.bound.is_zero() || !self.bound.is_unit() {
            return Err(ConditionError::BoundOutOfRange(self.bound));
        }
        Ok(())
    }

    pub fn rename_witnesses(&self, map: &dyn Fn(u32) -> u32) -> Bound {
        Bound::new(self.formula.rename_witnesses(map), self.bound)
    }
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.formula == other.formula
    }
}
impl Eq for Bound {}

impl Hash for Bound {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
        self.bound.hash(state);
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .cmp(&other.key)
            .then(self.bound.cmp(&other.bound))
            .then_with(|| self.formula.cmp(&other.formula))
    }
}
impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} < {}", self.key, self.bound)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConditionError {
    #[error("`{0}` is not a quantifier-free restricted sentence")]
    NotQuantifierFree(String),
    #[error("bound {0} outside (0,1]")]
    BoundOutOfRange(Dyadic),
    #[error("formula: {0}")]
    Parse(#[from] ParseError),
    #[error("bound: {0}")]
    Dyadic(#[from] DyadicError),
    #[error("malformed condition document: {0}")]
    Format(String),
}

/// Evidence that a condition is jointly satisfiable with the theory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    Witness(FiniteStructure),
    /// Accepted without a witness under the optimistic policy.
    Assumed(String),
}

impl Certificate {
    pub fn witness(&self) -> Option<&FiniteStructure> {
        match self {
            Certificate::Witness(w) => Some(w),
            Certificate::Assumed(_) => None,
        }
    }
}

/// A certified finite set of strict bounds. Equality ignores the certificate.
#[derive(Clone, Debug)]
pub struct Condition {
    pub bounds: BTreeSet<Bound>,
    pub cert: Certificate,
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds
    }
}
impl Eq for Condition {}
impl Hash for Condition {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.bounds.hash(state);
    }
}

impl Condition {
    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Setwise `self ⊇ other`.
    pub fn extends(&self, other: &Condition) -> bool {
        other.bounds.is_subset(&self.bounds)
    }

    pub fn contains(&self, b: &Bound) -> bool {
        self.bounds.contains(b)
    }

    pub fn witness(&self) -> Option<&FiniteStructure> {
        self.cert.witness()
    }

    pub fn is_assumed(&self) -> bool {
        matches!(self.cert, Certificate::Assumed(_))
    }

    /// Witness constants mentioned by any bound.
    pub fn constants(&self) -> BTreeSet<u32> {
        self.bounds.iter().flat_map(|b| b.formula.witnesses()).collect()
    }

    /// Smallest bound on the atomic sentence `phi`, or 1 when there is none.
    pub fn f(&self, phi: &Formula) -> Dyadic {
        self.bounds
            .iter()
            .filter(|b| *b.formula == *phi)
            .map(|b| b.bound)
            .min()
            .unwrap_or(Dyadic::ONE)
    }

    pub fn canonical(&self) -> Vec<Bound> {
        self.bounds.iter().cloned().collect()
    }

    pub fn to_wire(&self) -> Vec<WireBound> {
        to_wire(self.bounds.iter())
    }

    /// Bounds of `self` that are not in `base`.
    pub fn added_over(&self, base: &Condition) -> Vec<Bound> {
        self.bounds.difference(&base.bounds).cloned().collect()
    }

    /// Applies a witness-constant renaming to bounds and certificate.
    pub fn rename_witnesses(&self, map: &BTreeMap<u32, u32>) -> Condition {
        let f = |c: u32| *map.get(&c).unwrap_or(&c);
        let bounds = self.bounds.iter().map(|b| b.rename_witnesses(&f)).collect();
        let cert = match &self.cert {
            Certificate::Witness(w) => {
                let mut w = w.clone();
                w.constants = w.constants.iter().map(|(&c, &e)| (f(c), e)).collect();
                Certificate::Witness(w)
            }
            other => other.clone(),
        };
        Condition { bounds, cert }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.bounds.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "}}")
    }
}

/// `{formula, bound}` as exchanged in files and over HTTP.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireBound {
    pub formula: String,
    pub bound: Dyadic,
}

pub fn to_wire<'a>(bounds: impl IntoIterator<Item = &'a Bound>) -> Vec<WireBound> {
    bounds.into_iter().map(|b| WireBound { formula: b.text().to_string(), bound: b.bound }).collect()
}

/// Parses and validates the wire form; the result is sorted canonically and deduplicated.
pub fn parse_wire(items: &[WireBound], sig: &Signature) -> Result<Vec<Bound>, ConditionError> {
    let mut out = BTreeSet::new();
    for w in items {
        let b = Bound::new(parse_formula(&w.formula, sig)?, w.bound);
        b.validate()?;
        out.insert(b);
    }
    Ok(out.into_iter().collect())
}

pub fn parse_wire_json(text: &str, sig: &Signature) -> Result<Vec<Bound>, ConditionError> {
    let items: Vec<WireBound> = serde_json::from_str(text).map_err(|e| ConditionError::Format(e.to_string()))?;
    parse_wire(&items, sig)
}

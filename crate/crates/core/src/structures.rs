//! Finite discretised `L(C)`-structures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::logic::classify::is_existential;
use crate::logic::eval::{eval, Assignment};
use crate::logic::formula::Formula;
use crate::logic::signature::Signature;

/// A finite structure with dyadic tables on the grid `2^-grid_exp`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteStructure {
    pub universe: usize,
    pub grid_exp: u32,
    /// Row-major `universe x universe`.
    pub metric: Vec<Dyadic>,
    /// Row-major tables of length `universe^arity`.
    pub predicates: BTreeMap<String, Vec<Dyadic>>,
    pub functions: BTreeMap<String, Vec<usize>>,
    /// Witness constant `c_i` to element.
    pub constants: BTreeMap<u32, usize>,
}

/// First violated table-level invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptyUniverse,
    TableShape(String),
    OffGrid(String),
    NonzeroDiagonal(usize),
    Asymmetric(usize, usize),
    IdentityOfIndiscernibles(usize, usize),
    Triangle(usize, usize, usize),
    Modulus { symbol: String, left: Vec<usize>, right: Vec<usize> },
    NotClassical(String),
    ElementOutOfRange(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyUniverse => write!(f, "empty universe"),
            Violation::TableShape(s) => write!(f, "table shape: {s}"),
            Violation::OffGrid(s) => write!(f, "value off grid or outside [0,1] in {s}"),
            Violation::NonzeroDiagonal(i) => write!(f, "reflexivity: d({i},{i}) != 0"),
            Violation::Asymmetric(i, j) => write!(f, "symmetry: d({i},{j}) != d({j},{i})"),
            Violation::IdentityOfIndiscernibles(i, j) => {
                write!(f, "identity of indiscernibles: d({i},{j}) = 0")
            }
            Violation::Triangle(i, j, k) => write!(f, "triangle: d({i},{k}) > d({i},{j}) + d({j},{k})"),
            Violation::Modulus { symbol, left, right } => {
                write!(f, "modulus of `{symbol}` violated at {left:?} vs {right:?}")
            }
            Violation::NotClassical(s) => write!(f, "classical: non-{{0,1}} value in {s}"),
            Violation::ElementOutOfRange(s) => write!(f, "element out of range in {s}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("constant c{constant} already interpreted as {existing}, cannot reassign to {requested}")]
    Reassigned { constant: u32, existing: usize, requested: usize },
    #[error("element {0} outside the universe")]
    OutOfRange(usize),
    #[error("constant c{0} is not interpreted")]
    Uninterpreted(u32),
    #[error("malformed structure document: {0}")]
    Format(String),
}

/// Tuples of `0..n` of the given length, in lexicographic order.
pub fn tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    if arity == 0 {
        return vec![vec![]];
    }
    (0..arity).map(|_| 0..n).multi_cartesian_product().collect()
}

pub fn tuple_index(n: usize, t: &[usize]) -> usize {
    t.iter().fold(0, |acc, &e| acc * n + e)
}

impl FiniteStructure {
    /// Single point, empty tables for every symbol of `sig` (predicates 0, functions constant).
    pub fn point(sig: &Signature, grid_exp: u32) -> FiniteStructure {
        let mut s = FiniteStructure {
            universe: 1,
            grid_exp,
            metric: vec![Dyadic::ZERO],
            predicates: BTreeMap::new(),
            functions: BTreeMap::new(),
            constants: BTreeMap::new(),
        };
        for p in &sig.predicates {
            s.predicates.insert(p.name.clone(), vec![Dyadic::ZERO]);
        }
        for f in &sig.functions {
            s.functions.insert(f.name.clone(), vec![0]);
        }
        s
    }

    pub fn dist(&self, i: usize, j: usize) -> Dyadic {
        self.metric[i * self.universe + j]
    }

    pub fn pred(&self, name: &str, args: &[usize]) -> Option<Dyadic> {
        self.predicates.get(name).map(|t| t[tuple_index(self.universe, args)])
    }

    pub fn func(&self, name: &str, args: &[usize]) -> Option<usize> {
        self.functions.get(name).map(|t| t[tuple_index(self.universe, args)])
    }

    fn max_dist(&self, a: &[usize], b: &[usize]) -> Dyadic {
        a.iter().zip(b).map(|(&x, &y)| self.dist(x, y)).max().unwrap_or(Dyadic::ZERO)
    }

    /// Checks the metric axioms, grid membership, moduli and the classical restriction.
    pub fn validate(&self, sig: &Signature) -> Result<(), Violation> {
        let n = self.universe;
        if n == 0 {
            return Err(Violation::EmptyUniverse);
        }
        if self.metric.len() != n * n {
            return Err(Violation::TableShape("metric".into()));
        }
        let unit = |v: &Dyadic| v.is_unit() && v.on_grid(self.grid_exp);
        let classical = |v: &Dyadic| *v == Dyadic::ZERO || *v == Dyadic::ONE;
        if !self.metric.iter().all(unit) {
            return Err(Violation::OffGrid("metric".into()));
        }
        if sig.classical && !self.metric.iter().all(classical) {
            return Err(Violation::NotClassical("metric".into()));
        }
        for i in 0..n {
            if !self.dist(i, i).is_zero() {
                return Err(Violation::NonzeroDiagonal(i));
            }
            for j in 0..n {
                if self.dist(i, j) != self.dist(j, i) {
                    return Err(Violation::Asymmetric(i.min(j), i.max(j)));
                }
                if i != j && self.dist(i, j).is_zero() {
                    return Err(Violation::IdentityOfIndiscernibles(i.min(j), i.max(j)));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.dist(i, k) > self.dist(i, j).add(self.dist(j, k)) {
                        return Err(Violation::Triangle(i, j, k));
                    }
                }
            }
        }
        for p in &sig.predicates {
            let table = self.predicates.get(&p.name).ok_or_else(|| Violation::TableShape(p.name.clone()))?;
            if table.len() != n.pow(p.arity as u32) {
                return Err(Violation::TableShape(p.name.clone()));
            }
            if !table.iter().all(unit) {
                return Err(Violation::OffGrid(p.name.clone()));
            }
            if sig.classical && !table.iter().all(classical) {
                return Err(Violation::NotClassical(p.name.clone()));
            }
            if sig.classical {
                // On {0,1} tables with the discrete metric every modulus L >= 1 holds.
                continue;
            }
            let ts = tuples(n, p.arity);
            for a in &ts {
                for b in &ts {
                    let lhs = table[tuple_index(n, a)].abs_diff(table[tuple_index(n, b)]);
                    if lhs > self.max_dist(a, b).mul_int(p.lipschitz) {
                        return Err(Violation::Modulus { symbol: p.name.clone(), left: a.clone(), right: b.clone() });
                    }
                }
            }
        }
        for f in &sig.functions {
            let table = self.functions.get(&f.name).ok_or_else(|| Violation::TableShape(f.name.clone()))?;
            if table.len() != n.pow(f.arity as u32) {
                return Err(Violation::TableShape(f.name.clone()));
            }
            if table.iter().any(|&e| e >= n) {
                return Err(Violation::ElementOutOfRange(f.name.clone()));
            }
            if sig.classical {
                continue;
            }
            let ts = tuples(n, f.arity);
            for a in &ts {
                for b in &ts {
                    let lhs = self.dist(table[tuple_index(n, a)], table[tuple_index(n, b)]);
                    if lhs > self.max_dist(a, b).mul_int(f.lipschitz) {
                        return Err(Violation::Modulus { symbol: f.name.clone(), left: a.clone(), right: b.clone() });
                    }
                }
            }
        }
        if self.constants.values().any(|&e| e >= n) {
            return Err(Violation::ElementOutOfRange("constants".into()));
        }
        Ok(())
    }

    /// Interprets further witness constants.
    pub fn expand_constants(&self, plan: &BTreeMap<u32, usize>) -> Result<FiniteStructure, StructureError> {
        let mut out = self.clone();
        for (&c, &e) in plan {
            if e >= self.universe {
                return Err(StructureError::OutOfRange(e));
            }
            match out.constants.get(&c) {
                Some(&old) if old != e => {
                    return Err(StructureError::Reassigned { constant: c, existing: old, requested: e })
                }
                _ => {
                    out.constants.insert(c, e);
                }
            }
        }
        Ok(out)
    }

    /// Every element is named by a witness constant (density on a finite universe).
    pub fn is_canonical_at_scale(&self) -> bool {
        let named: BTreeSet<usize> = self.constants.values().copied().collect();
        named.len() == self.universe
    }

    /// Substructure generated by the interpretations of `consts` (and signature constants).
    pub fn generated_substructure(&self, consts: &BTreeSet<u32>) -> Result<FiniteStructure, StructureError> {
        let mut elems = BTreeSet::new();
        for c in consts {
            elems.insert(*self.constants.get(c).ok_or(StructureError::Uninterpreted(*c))?);
        }
        for (_, table) in self.functions.iter().filter(|(_, t)| t.len() == 1) {
            elems.insert(table[0]);
        }
        let arities: Vec<(&String, usize)> = self
            .functions
            .iter()
            .map(|(name, t)| (name, arity_of(t.len(), self.universe)))
            .collect();
        loop {
            let before = elems.len();
            let current: Vec<usize> = elems.iter().copied().collect();
            for (name, arity) in &arities {
                if *arity == 0 {
                    continue;
                }
                for t in (0..*arity).map(|_| current.iter().copied()).multi_cartesian_product() {
                    elems.insert(self.func(name, &t).unwrap());
                }
            }
            if elems.len() == before {
                break;
            }
        }
        Ok(self.restrict(&elems.into_iter().collect::<Vec<_>>()))
    }

    /// Restriction to the listed elements (which must be closed under functions).
    pub fn restrict(&self, keep: &[usize]) -> FiniteStructure {
        let m = keep.len();
        let pos: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut metric = Vec::with_capacity(m * m);
        for &i in keep {
            for &j in keep {
                metric.push(self.dist(i, j));
            }
        }
        let predicates = self
            .predicates
            .iter()
            .map(|(name, t)| {
                let k = arity_of(t.len(), self.universe);
                let table = tuples(m, k)
                    .iter()
                    .map(|tup| {
                        let orig: Vec<usize> = tup.iter().map(|&i| keep[i]).collect();
                        t[tuple_index(self.universe, &orig)]
                    })
                    .collect();
                (name.clone(), table)
            })
            .collect();
        let functions = self
            .functions
            .iter()
            .map(|(name, t)| {
                let k = arity_of(t.len(), self.universe);
                let table = tuples(m, k)
                    .iter()
                    .map(|tup| {
                        let orig: Vec<usize> = tup.iter().map(|&i| keep[i]).collect();
                        pos[&t[tuple_index(self.universe, &orig)]]
                    })
                    .collect();
                (name.clone(), table)
            })
            .collect();
        let constants = self
            .constants
            .iter()
            .filter_map(|(&c, e)| pos.get(e).map(|&i| (c, i)))
            .collect();
        FiniteStructure { universe: m, grid_exp: self.grid_exp, metric, predicates, functions, constants }
    }

    /// Same tables, re-represented on the finer grid `2^-g`.
    pub fn refine(&self, g: u32) -> FiniteStructure {
        assert!(g >= self.grid_exp, "refinement must not coarsen the grid");
        FiniteStructure { grid_exp: g, ..self.clone() }
    }

    /// Largest exponent appearing in any table.
    pub fn max_table_exponent(&self) -> u32 {
        self.metric
            .iter()
            .chain(self.predicates.values().flatten())
            .map(|v| v.exponent())
            .max()
            .unwrap_or(0)
    }
}

pub(crate) fn arity_of(len: usize, n: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let mut k = 0;
    let mut acc = 1;
    while acc < len {
        acc *= n;
        k += 1;
    }
    k
}

/// Whether `theta` preserves metric, predicates, functions and shared constants within `slack`.
pub fn check_embedding(a: &FiniteStructure, b: &FiniteStructure, theta: &[usize], slack: Dyadic) -> bool {
    if theta.len() != a.universe || theta.iter().any(|&e| e >= b.universe) {
        return false;
    }
    for i in 0..a.universe {
        for j in 0..a.universe {
            if a.dist(i, j).abs_diff(b.dist(theta[i], theta[j])) > slack {
                return false;
            }
        }
    }
    for (name, ta) in &a.predicates {
        let Some(tb) = b.predicates.get(name) else { return false };
        let k = arity_of(ta.len(), a.universe);
        for t in tuples(a.universe, k) {
            let mapped: Vec<usize> = t.iter().map(|&e| theta[e]).collect();
            if ta[tuple_index(a.universe, &t)].abs_diff(tb[tuple_index(b.universe, &mapped)]) > slack {
                return false;
            }
        }
    }
    for (name, ta) in &a.functions {
        let Some(tb) = b.functions.get(name) else { return false };
        let k = arity_of(ta.len(), a.universe);
        for t in tuples(a.universe, k) {
            let mapped: Vec<usize> = t.iter().map(|&e| theta[e]).collect();
            let image = theta[ta[tuple_index(a.universe, &t)]];
            if b.dist(image, tb[tuple_index(b.universe, &mapped)]) > slack {
                return false;
            }
        }
    }
    for (c, &ea) in &a.constants {
        if let Some(&eb) = b.constants.get(c) {
            if b.dist(theta[ea], eb) > slack {
                return false;
            }
        }
    }
    true
}

/// Outcome of an existential-closedness check along an embedding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EcCheck {
    Holds,
    Fails { formula: Formula, tuple: Vec<usize>, inf_a: Dyadic, inf_b: Dyadic },
    Unknown,
}

/// Compares infima of existential formulas over `a` and over `b` along `theta`.
pub fn check_ec_at(
    a: &FiniteStructure,
    b: &FiniteStructure,
    theta: &[usize],
    family: &[Formula],
    slack: Dyadic,
) -> EcCheck {
    if family.is_empty() {
        return EcCheck::Unknown;
    }
    for phi in family {
        debug_assert!(is_existential(phi));
        let vars: Vec<u32> = phi.free_vars().into_iter().collect();
        for t in tuples(a.universe, vars.len()) {
            let asg_a: Assignment = vars.iter().copied().zip(t.iter().copied()).collect();
            let asg_b: Assignment = vars.iter().copied().zip(t.iter().map(|&e| theta[e])).collect();
            let (Ok(va), Ok(vb)) = (eval(phi, a, &asg_a), eval(phi, b, &asg_b)) else {
                return EcCheck::Unknown;
            };
            if va.abs_diff(vb) > slack {
                return EcCheck::Fails { formula: phi.clone(), tuple: t, inf_a: va, inf_b: vb };
            }
        }
    }
    EcCheck::Holds
}

/// Every structure on `n` points over `sig` with tables on grid `2^-g`, up to `limit`.
///
/// Functions are skipped (relational enumeration only). Returns the list and
/// whether the enumeration was exhaustive.
pub fn all_structures(sig: &Signature, n: usize, g: u32, limit: usize) -> (Vec<FiniteStructure>, bool) {
    let values = if sig.classical { vec![Dyadic::ZERO, Dyadic::ONE] } else { Dyadic::grid(g) };
    let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
    let positive: Vec<Dyadic> = values.iter().copied().filter(|v| !v.is_zero()).collect();
    let mut metrics = Vec::new();
    if pairs.is_empty() {
        metrics.push(vec![Dyadic::ZERO; n * n]);
    } else {
        for choice in pairs.iter().map(|_| positive.iter().copied()).multi_cartesian_product() {
            let mut m = vec![Dyadic::ZERO; n * n];
            for (&(i, j), v) in pairs.iter().zip(&choice) {
                m[i * n + j] = *v;
                m[j * n + i] = *v;
            }
            metrics.push(m);
        }
    }
    let mut out = Vec::new();
    let table_sizes: Vec<(String, usize)> =
        sig.predicates.iter().map(|p| (p.name.clone(), n.pow(p.arity as u32))).collect();
    let total_entries: usize = table_sizes.iter().map(|(_, s)| s).sum();
    for m in metrics {
        let choices: Box<dyn Iterator<Item = Vec<Dyadic>>> = if total_entries == 0 {
            Box::new(std::iter::once(vec![]))
        } else {
            Box::new((0..total_entries).map(|_| values.iter().copied()).multi_cartesian_product())
        };
        for entries in choices {
            let mut predicates = BTreeMap::new();
            let mut off = 0;
            for (name, size) in &table_sizes {
                predicates.insert(name.clone(), entries[off..off + size].to_vec());
                off += size;
            }
            let s = FiniteStructure {
                universe: n,
                grid_exp: g,
                metric: m.clone(),
                predicates,
                functions: BTreeMap::new(),
                constants: BTreeMap::new(),
            };
            if s.validate(sig).is_ok() {
                if out.len() >= limit {
                    return (out, false);
                }
                out.push(s);
            }
        }
    }
    (out, true)
}

/// JSON document form of a structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureFile {
    pub universe: usize,
    pub grid_exp: u32,
    pub metric: Vec<Dyadic>,
    #[serde(default)]
    pub predicates: BTreeMap<String, Vec<Dyadic>>,
    #[serde(default)]
    pub functions: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub constants: BTreeMap<String, usize>,
}

impl From<&FiniteStructure> for StructureFile {
    fn from(s: &FiniteStructure) -> Self {
        StructureFile {
            universe: s.universe,
            grid_exp: s.grid_exp,
            metric: s.metric.clone(),
            predicates: s.predicates.clone(),
            functions: s.functions.clone(),
            constants: s.constants.iter().map(|(c, e)| (format!("c{c}"), *e)).collect(),
        }
    }
}

impl TryFrom<StructureFile> for FiniteStructure {
    type Error = StructureError;

    fn try_from(f: StructureFile) -> Result<Self, Self::Error> {
        let mut constants = BTreeMap::new();
        for (name, e) in f.constants {
            let idx = name
                .strip_prefix('c')
                .and_then(|r| r.parse::<u32>().ok())
                .ok_or_else(|| StructureError::Format(format!("bad constant name `{name}`")))?;
            constants.insert(idx, e);
        }
        if f.metric.len() != f.universe * f.universe {
            return Err(StructureError::Format("metric must have universe^2 entries".into()));
        }
        Ok(FiniteStructure {
            universe: f.universe,
            grid_exp: f.grid_exp,
            metric: f.metric,
            predicates: f.predicates,
            functions: f.functions,
            constants,
        })
    }
}

impl FiniteStructure {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StructureFile::from(self)).expect("structure serialises")
    }

    pub fn from_json(text: &str) -> Result<FiniteStructure, StructureError> {
        let f: StructureFile = serde_json::from_str(text).map_err(|e| StructureError::Format(e.to_string()))?;
        f.try_into()
    }
}

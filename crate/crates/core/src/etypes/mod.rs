//! Bounded approximations of existential types: enumeration, the type metric and isolation
//! and maximality probes.
//!
//! An existential formula of *depth* `D` in `n` free variables is either an atom over
//! `x0..x{n-1}` or `inf y . max(l1, ..., lw)` with `w <= D` literals (atoms mentioning `y` or
//! their negations). One quantified variable is enough for the probes below: its value only
//! depends on one-point extensions.

use std::collections::BTreeMap;
use std::sync::Arc;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::forcing::Interval;
use crate::game::CompiledApprox;
use crate::logic::derived::max_all;
use crate::logic::eval::{eval, Assignment};
use crate::logic::formula::{Formula, Term};
use crate::logic::signature::Signature;
use crate::oracle::{SearchBounds, Theory};
use crate::structures::{all_structures, tuples, FiniteStructure};

/// Version tag of the formula enumeration, emitted in type reports.
pub const ENUMERATION: &str = "etype-v1";

/// Per-size cap on enumerated structures.
const STRUCTURE_LIMIT: usize = 20_000;

/// The shared existential formula list for `arity` free variables at `depth`.
pub fn etype_formulas(sig: &Signature, arity: usize, depth: usize) -> Vec<Formula> {
    let xs: Vec<Term> = (0..arity as u32).map(Term::var).collect();
    let mut out = atoms_over(sig, &xs, None);
    if depth == 0 {
        return out;
    }
    let y = arity as u32;
    let mut with_y = xs.clone();
    with_y.push(Term::var(y));
    let atoms = atoms_over(sig, &with_y, Some(y));
    let literals: Vec<Formula> = atoms.iter().cloned().chain(atoms.iter().cloned().map(Formula::neg)).collect();
    for w in 1..=depth.min(literals.len()) {
        for combo in literals.iter().cloned().combinations(w) {
            out.push(Formula::inf(y, max_all(combo)));
        }
    }
    out
}

/// Atoms over `terms`; with `need` only those mentioning that variable.
fn atoms_over(sig: &Signature, terms: &[Term], need: Option<u32>) -> Vec<Formula> {
    let mentions = |ts: &[Term]| need.is_none_or(|v| ts.contains(&Term::var(v)));
    let mut out = Vec::new();
    for p in &sig.predicates {
        for args in (0..p.arity).map(|_| terms.iter().cloned()).multi_cartesian_product() {
            if mentions(&args) {
                out.push(Formula::atom(&p.name, args));
            }
        }
    }
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            if mentions(&[a.clone(), b.clone()]) {
                out.push(Formula::dist(a.clone(), b.clone()));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Provenance {
    Structure {
        #[serde(skip)]
        structure: Box<FiniteStructure>,
        tuple: Vec<usize>,
    },
    Compiled {
        constants: Vec<u32>,
    },
}

/// Values of the enumerated existential formulas at one tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ETypeApprox {
    pub arity: usize,
    pub depth: usize,
    pub formulas: Arc<Vec<Formula>>,
    pub values: Vec<Interval>,
    pub provenance: Provenance,
}

impl ETypeApprox {
    /// Exact-value key for hashing and matching.
    pub fn key(&self) -> Vec<Interval> {
        self.values.clone()
    }

    /// `max_i |self_i - other_i|` over interval midpoints' extremes; zero iff both are the same
    /// point map.
    pub fn sup_gap(&self, other: &ETypeApprox) -> Dyadic {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.hi.sub_sat(b.lo).max(b.hi.sub_sat(a.lo)))
            .max()
            .unwrap_or(Dyadic::ZERO)
    }

    /// Every value of `other` lies within this approximation's intervals widened by `slack`.
    pub fn admits(&self, other: &ETypeApprox, slack: Dyadic) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| b.within(a, slack))
    }

    /// Pointwise `self <= other` on upper ends.
    pub fn below(&self, other: &ETypeApprox) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a.hi <= b.lo)
    }

    /// Every value of `self` is at most the upper end of `other`'s.
    pub fn refines(&self, other: &ETypeApprox) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a.hi <= b.hi)
    }

    pub fn report(&self) -> TypeReport {
        TypeReport {
            enumeration: ENUMERATION,
            arity: self.arity,
            depth: self.depth,
            entries: self
                .formulas
                .iter()
                .zip(&self.values)
                .map(|(f, i)| TypeEntry { formula: f.to_string(), interval: *i })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeEntry {
    pub formula: String,
    pub interval: Interval,
}

/// Type report document.
#[derive(Clone, Debug, Serialize)]
pub struct TypeReport {
    pub enumeration: &'static str,
    pub arity: usize,
    pub depth: usize,
    pub entries: Vec<TypeEntry>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EtypeError {
    #[error("constant c{0} is not interpreted")]
    Missing(u32),
    #[error("element {0} is outside the universe")]
    OutOfRange(usize),
}

fn values_at(formulas: &[Formula], a: &FiniteStructure, tuple: &[usize]) -> Vec<Interval> {
    let asg: Assignment = tuple.iter().enumerate().map(|(i, &e)| (i as u32, e)).collect();
    formulas.iter().map(|f| Interval::point(eval(f, a, &asg).expect("etype formulas are interpreted"))).collect()
}

/// Existential type of an element tuple of a finite structure.
pub fn etype_of(a: &FiniteStructure, sig: &Signature, tuple: &[usize], depth: usize) -> Result<ETypeApprox, EtypeError> {
    if let Some(&e) = tuple.iter().find(|&&e| e >= a.universe) {
        return Err(EtypeError::OutOfRange(e));
    }
    let formulas = Arc::new(etype_formulas(sig, tuple.len(), depth));
    Ok(etype_with(&formulas, a, tuple, depth))
}

fn etype_with(formulas: &Arc<Vec<Formula>>, a: &FiniteStructure, tuple: &[usize], depth: usize) -> ETypeApprox {
    ETypeApprox {
        arity: tuple.len(),
        depth,
        formulas: Arc::clone(formulas),
        values: values_at(formulas, a, tuple),
        provenance: Provenance::Structure { structure: Box::new(a.clone()), tuple: tuple.to_vec() },
    }
}

/// Existential type of a constant tuple in a compiled approximation.
///
/// Definitive tracked atoms take their compiled interval (restricted to `{0,1}` in classical
/// signatures); every other formula is read off the witness.
pub fn etype_of_compiled(c: &CompiledApprox, sig: &Signature, constants: &[u32], depth: usize) -> Result<ETypeApprox, EtypeError> {
    let tuple: Vec<usize> = constants.iter().map(|&k| c.element(k).ok_or(EtypeError::Missing(k))).collect::<Result<_, _>>()?;
    let formulas = Arc::new(etype_formulas(sig, tuple.len(), depth));
    let mut values = values_at(&formulas, &c.witness, &tuple);
    let subst: BTreeMap<u32, Term> = constants.iter().enumerate().map(|(i, &k)| (i as u32, Term::c(k))).collect();
    for (f, v) in formulas.iter().zip(values.iter_mut()) {
        if f.is_atomic() {
            let ground = f.instantiate(&subst);
            if let (Some(i), Some(true)) = (c.interval(&ground), c.definitive.get(&ground)) {
                *v = if sig.classical { classical_snap(i) } else { i };
            }
        }
    }
    Ok(ETypeApprox {
        arity: tuple.len(),
        depth,
        formulas,
        values,
        provenance: Provenance::Compiled { constants: constants.to_vec() },
    })
}

/// `i` intersected with `{0, 1}`, as a point when that leaves one value.
fn classical_snap(i: Interval) -> Interval {
    match (i.contains(Dyadic::ZERO), i.contains(Dyadic::ONE)) {
        (true, false) => Interval::point(Dyadic::ZERO),
        (false, true) => Interval::point(Dyadic::ONE),
        _ => i,
    }
}

/// Bracket on the type distance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeDistance {
    pub interval: Interval,
    /// Every structure within the bounds was searched.
    pub exhaustive: bool,
}

/// Finite models of `T` enumerated within `b`; `None` for signatures with function symbols.
fn searched_models(theory: &Theory, b: &SearchBounds) -> Option<(Vec<FiniteStructure>, bool)> {
    if !theory.signature.is_relational() || b.node_budget == 0 {
        return None;
    }
    let mut out = Vec::new();
    let mut complete = true;
    for n in 1..=b.max_universe {
        let (ss, full) = all_structures(&theory.signature, n, b.grid_exp, STRUCTURE_LIMIT);
        complete &= full;
        out.extend(ss.into_iter().filter(|s| theory.is_model(s)));
        if out.len() as u64 > b.node_budget {
            return Some((out, false));
        }
    }
    Some((out, complete))
}

/// Upper bound from the best joint realization of `pi` and `rho` in one searched model.
///
/// The lower bound is 0 unless the search is exhaustive and classical, where it equals the
/// best found distance at the bound.
pub fn etype_distance(theory: &Theory, pi: &ETypeApprox, rho: &ETypeApprox, b: &SearchBounds) -> TypeDistance {
    if pi.values == rho.values {
        return TypeDistance { interval: Interval::point(Dyadic::ZERO), exhaustive: true };
    }
    let Some((models, complete)) = searched_models(theory, b) else {
        return TypeDistance { interval: Interval::UNIT, exhaustive: false };
    };
    let slack = Dyadic::ZERO;
    let mut best = Dyadic::ONE;
    for m in &models {
        let ts = tuples(m.universe, pi.arity);
        let types: Vec<ETypeApprox> = ts.iter().map(|t| etype_with(&pi.formulas, m, t, pi.depth)).collect();
        let left: Vec<usize> = (0..ts.len()).filter(|&i| pi.admits(&types[i], slack)).collect();
        let right: Vec<usize> = (0..ts.len()).filter(|&i| rho.admits(&types[i], slack)).collect();
        for &i in &left {
            for &j in &right {
                let d = (0..pi.arity).map(|k| m.dist(ts[i][k], ts[j][k])).max().unwrap_or(Dyadic::ZERO);
                best = best.min(d);
            }
        }
    }
    let exhaustive = complete && theory.classical();
    let lo = if exhaustive { best } else { Dyadic::ZERO };
    TypeDistance { interval: Interval::new(lo, best), exhaustive }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Isolation {
    Isolated {
        #[serde(serialize_with = "crate::game::compile::ser_formula")]
        theta: Formula,
        eta: Dyadic,
        certificate: String,
    },
    NotIsolatedAtBound {
        #[serde(skip)]
        near: Box<ETypeApprox>,
        #[serde(skip)]
        far: Box<ETypeApprox>,
        distance: Interval,
    },
    Unknown {
        reason: String,
    },
}

/// Types realized in searched models that no other searched type lies below.
pub fn maximal_types(theory: &Theory, arity: usize, depth: usize, b: &SearchBounds) -> Option<(Vec<ETypeApprox>, bool)> {
    let (models, complete) = searched_models(theory, b)?;
    let formulas = Arc::new(etype_formulas(&theory.signature, arity, depth));
    let mut seen: BTreeMap<Vec<Interval>, ETypeApprox> = BTreeMap::new();
    for m in &models {
        for t in tuples(m.universe, arity) {
            let ty = etype_with(&formulas, m, &t, depth);
            seen.entry(ty.key()).or_insert(ty);
        }
    }
    let all: Vec<ETypeApprox> = seen.into_values().collect();
    let maximal = all
        .iter()
        .filter(|r| !all.iter().any(|s| s.values != r.values && s.below(r)))
        .cloned()
        .collect();
    Some((maximal, complete))
}

/// Looks for a basic open `[theta < eta]` around `pi` whose searched maximal types all lie
/// within `eps` of `pi`.
pub fn is_isolated_probe(theory: &Theory, pi: &ETypeApprox, eps: Dyadic, b: &SearchBounds) -> Isolation {
    if eps >= Dyadic::ONE {
        return Isolated::whole_space(pi.arity);
    }
    if b.node_budget == 0 {
        return Isolation::Unknown { reason: "search budget depleted".into() };
    }
    let Some((maximal, complete)) = maximal_types(theory, pi.arity, pi.depth, b) else {
        return Isolation::Unknown { reason: "type search needs a relational signature".into() };
    };
    if maximal.is_empty() {
        return Isolation::Unknown { reason: "no searched types".into() };
    }
    let slack = b.slack();
    let mut last_far = None;
    // Quantified formulas first: they carry the existential content of the neighbourhood.
    let order = (0..pi.formulas.len()).sorted_by_key(|&i| (pi.formulas[i].is_atomic(), i));
    for i in order {
        let v = pi.values[i];
        if v.hi >= Dyadic::ONE {
            continue;
        }
        // Classical values are 0 or 1, so `< 1/2` pins the value 0.
        let eta = if theory.classical() { Dyadic::pow2_inv(1) } else { v.hi.add(slack).min(Dyadic::ONE) };
        let inside: Vec<&ETypeApprox> = maximal.iter().filter(|r| r.values[i].lo < eta).collect();
        if inside.is_empty() {
            continue;
        }
        let far = inside.iter().find(|r| {
            let d = if theory.classical() {
                // Distinct maximal types are never realized by one element: distance 1.
                if pi.admits(r, Dyadic::ZERO) { Dyadic::ZERO } else { Dyadic::ONE }
            } else {
                etype_distance(theory, pi, r, b).interval.lo
            };
            d > eps
        });
        match far {
            None => {
                return Isolation::Isolated {
                    theta: pi.formulas[i].clone(),
                    eta,
                    certificate: format!(
                        "{} searched maximal type(s) in the neighbourhood, all within {eps}",
                        inside.len()
                    ),
                }
            }
            Some(f) => last_far = Some(((*f).clone(), inside[0].clone())),
        }
    }
    match last_far {
        Some((far, near)) if complete && theory.classical() => Isolation::NotIsolatedAtBound {
            distance: Interval::point(Dyadic::ONE),
            near: Box::new(near),
            far: Box::new(far),
        },
        _ => Isolation::Unknown { reason: "no certified neighbourhood".into() },
    }
}

struct Isolated;

impl Isolated {
    fn whole_space(arity: usize) -> Isolation {
        let x = Term::var(0);
        let theta = if arity == 0 { Formula::dist(Term::c(0), Term::c(0)) } else { Formula::dist(x.clone(), x) };
        Isolation::Isolated { theta, eta: Dyadic::ONE, certificate: "tolerance covers the whole space".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Maximality {
    MaximalAtBound,
    ExtendedBy(Box<ETypeApprox>),
    Unknown(String),
}

/// Searches one-point extensions of the provenance structure for a strictly lower formula
/// value at the same tuple.
///
/// One-point extensions suffice: every enumerated formula quantifies one variable.
pub fn maximality_probe(theory: &Theory, pi: &ETypeApprox, b: &SearchBounds) -> Maximality {
    let Provenance::Structure { structure, tuple } = &pi.provenance else {
        return Maximality::Unknown("no provenance structure".into());
    };
    if b.node_budget == 0 {
        return Maximality::Unknown("search budget depleted".into());
    }
    if !theory.signature.is_relational() {
        return Maximality::Unknown("extension search needs a relational signature".into());
    }
    if structure.universe >= b.max_universe {
        return Maximality::MaximalAtBound;
    }
    let mut nodes = 0u64;
    let mut complete = true;
    for ext in one_point_extensions(structure, &theory.signature, b.grid_exp) {
        nodes += 1;
        if nodes > b.node_budget {
            complete = false;
            break;
        }
        if !theory.is_model(&ext) {
            continue;
        }
        let rho = etype_with(&pi.formulas, &ext, tuple, pi.depth);
        if rho.values.iter().zip(&pi.values).any(|(r, p)| r.hi < p.lo) {
            return Maximality::ExtendedBy(Box::new(rho));
        }
    }
    if complete {
        Maximality::MaximalAtBound
    } else {
        Maximality::Unknown("extension budget exhausted".into())
    }
}

/// Every valid structure on `universe + 1` points restricting to `a` on the first points.
pub fn one_point_extensions<'a>(a: &'a FiniteStructure, sig: &Signature, g: u32) -> impl Iterator<Item = FiniteStructure> + 'a {
    let n = a.universe;
    let m = n + 1;
    let values = if sig.classical { vec![Dyadic::ZERO, Dyadic::ONE] } else { Dyadic::grid(g) };
    let positive: Vec<Dyadic> = values.iter().copied().filter(|v| !v.is_zero()).collect();
    // New entries: distances to the old points, then predicate entries mentioning the new point.
    let mut slots: Vec<Vec<Dyadic>> = vec![positive; n];
    let mut pred_slots = Vec::new();
    for p in &sig.predicates {
        for t in tuples(m, p.arity) {
            if t.contains(&n) {
                pred_slots.push((p.name.clone(), t));
                slots.push(values.clone());
            }
        }
    }
    let sig = sig.clone();
    slots.into_iter().multi_cartesian_product().filter_map(move |choice| {
        let mut metric = vec![Dyadic::ZERO; m * m];
        for i in 0..n {
            for j in 0..n {
                metric[i * m + j] = a.dist(i, j);
            }
            metric[i * m + n] = choice[i];
            metric[n * m + i] = choice[i];
        }
        let mut predicates = BTreeMap::new();
        for p in &sig.predicates {
            let table: Vec<Dyadic> = tuples(m, p.arity)
                .iter()
                .map(|t| if t.contains(&n) { Dyadic::ZERO } else { a.pred(&p.name, t).unwrap_or(Dyadic::ZERO) })
                .collect();
            predicates.insert(p.name.clone(), table);
        }
        for ((name, t), v) in pred_slots.iter().zip(&choice[n..]) {
            let idx = crate::structures::tuple_index(m, t);
            predicates.get_mut(name).expect("declared predicate")[idx] = *v;
        }
        let s = FiniteStructure {
            universe: m,
            grid_exp: a.grid_exp.max(g),
            metric,
            predicates,
            functions: BTreeMap::new(),
            constants: a.constants.clone(),
        };
        s.validate(&sig).is_ok().then_some(s)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;

    fn edge() -> FiniteStructure {
        let mut s = FiniteStructure::point(&Signature::graphs(), 0);
        s.universe = 2;
        s.metric = vec![Dyadic::ZERO, Dyadic::ONE, Dyadic::ONE, Dyadic::ZERO];
        s.predicates.insert("E".into(), vec![Dyadic::ONE, Dyadic::ZERO, Dyadic::ZERO, Dyadic::ONE]);
        s
    }

    #[test]
    fn depth_zero_is_atomic_diagram() {
        let s = edge();
        let t = etype_of(&s, &Signature::graphs(), &[0, 1], 0).unwrap();
        assert!(t.formulas.iter().all(Formula::is_atomic));
        let e01 = t.formulas.iter().position(|f| f.to_string() == "E(x0,x1)").unwrap();
        assert_eq!(t.values[e01], Interval::point(Dyadic::ZERO));
    }

    #[test]
    fn edge_pair_has_neighbour() {
        let s = edge();
        let t = etype_of(&s, &Signature::graphs(), &[0, 1], 1).unwrap();
        let phi = parse_formula("inf x2 . E(x0,x2)", &Signature::graphs()).unwrap();
        let i = t.formulas.iter().position(|f| f == &phi).unwrap();
        assert_eq!(t.values[i], Interval::point(Dyadic::ZERO));
        let u = etype_of(&s, &Signature::graphs(), &[1, 0], 1).unwrap();
        assert_eq!(t.values, u.values);
    }

    #[test]
    fn single_vertex_extends() {
        let th = Theory::graphs();
        let mut s = FiniteStructure::point(&th.signature, 0);
        s.predicates.insert("E".into(), vec![Dyadic::ONE]);
        assert!(th.is_model(&s));
        let pi = etype_of(&s, &th.signature, &[0], 1).unwrap();
        let b = SearchBounds::new(3, 0);
        assert!(matches!(maximality_probe(&th, &pi, &b), Maximality::ExtendedBy(_)));
        assert_eq!(maximality_probe(&th, &pi, &b.with_budget(0)), Maximality::Unknown("search budget depleted".into()));
    }
}

//! Bounded witness search for quantifier-free conditions.
//!
//! Relational signatures: every element of a substructure generated by the
//! named terms is named, and the theory is universal, so it suffices to search
//! pseudo-structures on the named terms (distance 0 identifies terms) and take
//! the quotient. Signatures with proper function symbols fall back to an
//! element-based enumeration that is never complete.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;

use super::condition::Bound;
use super::theory::Theory;
use super::SearchBounds;
use crate::dyadic::Dyadic;
use crate::logic::classify::strip_block;
use crate::logic::eval::eval_sentence;
use crate::logic::formula::{Formula, Term};
use crate::structures::{tuple_index, tuples, FiniteStructure};

pub(crate) enum Outcome {
    Sat(FiniteStructure),
    /// No witness within the bounds.
    Exhausted,
    /// Finished without a witness, but the enumeration is not complete.
    Incomplete(String),
    Budget,
}

pub(crate) struct Request<'a> {
    pub theory: &'a Theory,
    pub bounds: &'a [Bound],
    pub search: &'a SearchBounds,
    pub seed: Option<&'a FiniteStructure>,
    /// Constants whose entries must stay free in local mode.
    pub focus: &'a BTreeSet<u32>,
    /// Fix every seed-determined entry outside the focus.
    pub local: bool,
}

/// Witness index reserved for the anonymous element of a structure with no named terms.
const ANON: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Name {
    Witness(u32),
    Const(String),
}

impl Name {
    fn term(&self) -> Term {
        match self {
            Name::Witness(c) => Term::Witness(*c),
            Name::Const(s) => Term::App(s.clone(), vec![]),
        }
    }
}

#[derive(Clone, Debug)]
enum Expr {
    Const(Dyadic),
    Var(usize),
    Neg(Box<Expr>),
    Half(Box<Expr>),
    Plus(Box<Expr>, Box<Expr>),
    Scale(u64, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    fn vars(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(e) | Expr::Half(e) | Expr::Scale(_, e) => e.vars(out),
            Expr::Plus(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Expr::Min(es) | Expr::Max(es) => es.iter().for_each(|e| e.vars(out)),
        }
    }

    /// Interval of possible values; unassigned variables range over `[0,1]`.
    fn range(&self, val: &[Option<Dyadic>]) -> (Dyadic, Dyadic) {
        match self {
            Expr::Const(c) => (*c, *c),
            Expr::Var(v) => match val[*v] {
                Some(x) => (x, x),
                None => (Dyadic::ZERO, Dyadic::ONE),
            },
            Expr::Neg(e) => {
                let (lo, hi) = e.range(val);
                (hi.one_minus(), lo.one_minus())
            }
            Expr::Half(e) => {
                let (lo, hi) = e.range(val);
                (lo.half(), hi.half())
            }
            Expr::Plus(a, b) => {
                let (alo, ahi) = a.range(val);
                let (blo, bhi) = b.range(val);
                (alo.dot_plus(blo), ahi.dot_plus(bhi))
            }
            Expr::Scale(l, e) => {
                let (lo, hi) = e.range(val);
                (lo.mul_int(*l), hi.mul_int(*l))
            }
            Expr::Min(es) => es.iter().map(|e| e.range(val)).fold((Dyadic::ONE, Dyadic::ONE), |acc, r| {
                (acc.0.min(r.0), acc.1.min(r.1))
            }),
            Expr::Max(es) => es.iter().map(|e| e.range(val)).fold((Dyadic::ZERO, Dyadic::ZERO), |acc, r| {
                (acc.0.max(r.0), acc.1.max(r.1))
            }),
        }
    }
}

/// `lhs <= rhs`.
struct Constraint {
    lhs: Expr,
    rhs: Expr,
}

impl Constraint {
    fn feasible(&self, val: &[Option<Dyadic>]) -> bool {
        self.lhs.range(val).0 <= self.rhs.range(val).1
    }
}

pub(crate) fn run(req: &Request<'_>) -> Outcome {
    let slack = req.search.slack();
    let mut uppers = Vec::with_capacity(req.bounds.len());
    for b in req.bounds {
        if b.bound < slack {
            return Outcome::Exhausted;
        }
        uppers.push(b.bound.sub_sat(slack));
    }
    if req.theory.signature.is_relational() {
        Relational::new(req, &uppers).solve()
    } else {
        element_search(req, &uppers)
    }
}

struct Relational<'a> {
    req: &'a Request<'a>,
    names: Vec<Name>,
    index: BTreeMap<Name, usize>,
    pred_offset: BTreeMap<String, (usize, usize)>,
    metric_base: usize,
    nvars: usize,
    domain: Vec<Dyadic>,
    constraints: Vec<Constraint>,
    watch: Vec<Vec<usize>>,
    val: Vec<Option<Dyadic>>,
    hint: Vec<Option<Dyadic>>,
    free: Vec<bool>,
    /// Names with at least one free entry; constraints among other names are skipped.
    live: Vec<bool>,
    nodes: u64,
}

impl<'a> Relational<'a> {
    fn new(req: &'a Request<'a>, uppers: &[Dyadic]) -> Relational<'a> {
        let sig = &req.theory.signature;
        let mut witnesses: BTreeSet<u32> = req.bounds.iter().flat_map(|b| b.formula.witnesses()).collect();
        let mut names: Vec<Name> = Vec::new();
        let sig_consts: Vec<Name> = sig.signature_constants().map(|s| Name::Const(s.name.clone())).collect();
        if witnesses.is_empty() && sig_consts.is_empty() {
            witnesses.insert(ANON);
        }
        names.extend(witnesses.iter().map(|&c| Name::Witness(c)));
        names.extend(sig_consts);
        let k = names.len();
        let index = names.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut pred_offset = BTreeMap::new();
        let mut off = 0;
        for p in &sig.predicates {
            pred_offset.insert(p.name.clone(), (off, p.arity));
            off += k.pow(p.arity as u32);
        }
        let metric_base = off;
        let nvars = off + k * k;
        let domain = if sig.classical {
            vec![Dyadic::ONE, Dyadic::ZERO]
        } else {
            let mut g = Dyadic::grid(req.search.grid_exp);
            g.reverse();
            g
        };
        let mut r = Relational {
            req,
            names,
            index,
            pred_offset,
            metric_base,
            nvars,
            domain,
            constraints: Vec::new(),
            watch: vec![Vec::new(); nvars],
            val: vec![None; nvars],
            hint: vec![None; nvars],
            free: vec![true; nvars],
            live: vec![true; k],
            nodes: 0,
        };
        r.seed_hints();
        r.build_constraints(uppers);
        r
    }

    fn metric_var(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.names.len();
        (i != j).then(|| self.metric_base + i.min(j) * k + i.max(j))
    }

    fn pred_var(&self, p: &str, args: &[usize]) -> usize {
        let (off, _) = self.pred_offset[p];
        off + tuple_index(self.names.len(), args)
    }

    fn term_index(&self, t: &Term) -> usize {
        let name = match t {
            Term::Witness(c) => Name::Witness(*c),
            Term::App(s, args) if args.is_empty() => Name::Const(s.clone()),
            other => panic!("non-ground or non-constant term `{other}` in relational search"),
        };
        self.index[&name]
    }

    fn compile(&self, f: &Formula) -> Expr {
        match f {
            Formula::Atomic(p, args) => {
                let idx: Vec<usize> = args.iter().map(|t| self.term_index(t)).collect();
                Expr::Var(self.pred_var(p, &idx))
            }
            Formula::Dist(a, b) => match self.metric_var(self.term_index(a), self.term_index(b)) {
                Some(v) => Expr::Var(v),
                None => Expr::Const(Dyadic::ZERO),
            },
            Formula::Neg(g) => Expr::Neg(Box::new(self.compile(g))),
            Formula::Half(g) => Expr::Half(Box::new(self.compile(g))),
            Formula::DotPlus(a, b) => Expr::Plus(Box::new(self.compile(a)), Box::new(self.compile(b))),
            Formula::Join(gs) => Expr::Min(gs.iter().map(|g| self.compile(g)).collect()),
            Formula::Meet(gs) => Expr::Max(gs.iter().map(|g| self.compile(g)).collect()),
            Formula::Sup(..) | Formula::Inf(..) => panic!("quantifier in a compiled ground formula"),
        }
    }

    /// Seed values for entries among named terms the seed interprets.
    fn seed_hints(&mut self) {
        let Some(seed) = self.req.seed else { return };
        let elems: Vec<Option<usize>> = self
            .names
            .iter()
            .map(|n| match n {
                Name::Witness(ANON) => Some(0),
                Name::Witness(c) => seed.constants.get(c).copied(),
                Name::Const(s) => seed.functions.get(s).map(|t| t[0]),
            })
            .collect();
        let focus_idx: Vec<bool> = self
            .names
            .iter()
            .map(|n| matches!(n, Name::Witness(c) if self.req.focus.contains(c)))
            .collect();
        let k = self.names.len();
        if self.req.local {
            self.live = (0..k).map(|i| focus_idx[i] || elems[i].is_none()).collect();
        }
        for i in 0..k {
            for j in i + 1..k {
                if let (Some(a), Some(b)) = (elems[i], elems[j]) {
                    let v = self.metric_var(i, j).unwrap();
                    self.hint[v] = Some(seed.dist(a, b));
                    if self.req.local && !focus_idx[i] && !focus_idx[j] {
                        self.free[v] = false;
                    }
                }
            }
        }
        let preds: Vec<(String, usize)> = self.pred_offset.iter().map(|(p, &(_, a))| (p.clone(), a)).collect();
        for (p, arity) in preds {
            for t in tuples(k, arity) {
                let mapped: Option<Vec<usize>> = t.iter().map(|&i| elems[i]).collect();
                if let Some(m) = mapped {
                    let v = self.pred_var(&p, &t);
                    self.hint[v] = seed.pred(&p, &m);
                    if self.req.local && t.iter().all(|&i| !focus_idx[i]) {
                        self.free[v] = false;
                    }
                }
            }
        }
        for v in 0..self.nvars {
            if !self.free[v] {
                self.val[v] = self.hint[v];
            }
        }
    }

    fn push(&mut self, lhs: Expr, rhs: Expr) {
        let mut vs = Vec::new();
        lhs.vars(&mut vs);
        rhs.vars(&mut vs);
        vs.sort_unstable();
        vs.dedup();
        if !vs.is_empty() && vs.iter().all(|&v| !self.free[v]) {
            // Entries fixed from the seed already satisfy every structural constraint.
            return;
        }
        let id = self.constraints.len();
        for &v in &vs {
            self.watch[v].push(id);
        }
        self.constraints.push(Constraint { lhs, rhs });
    }

    fn build_constraints(&mut self, uppers: &[Dyadic]) {
        let req = self.req;
        for (b, u) in req.bounds.iter().zip(uppers) {
            let e = self.compile(&b.formula);
            // Bounds are always kept: a bad seed must not be trusted on them.
            let id = self.constraints.len();
            let mut vs = Vec::new();
            e.vars(&mut vs);
            vs.sort_unstable();
            vs.dedup();
            for &v in &vs {
                self.watch[v].push(id);
            }
            self.constraints.push(Constraint { lhs: e, rhs: Expr::Const(*u) });
        }
        let k = self.names.len();
        let live = self.live.clone();
        let terms: Vec<Term> = self.names.iter().map(Name::term).collect();
        for ax in &req.theory.axioms {
            let (vars, matrix) = strip_block(ax, false);
            if vars.is_empty() {
                let e = self.compile(matrix);
                self.push(e, Expr::Const(Dyadic::ZERO));
                continue;
            }
            for t in (0..vars.len()).map(|_| 0..k).multi_cartesian_product() {
                if !t.iter().any(|&i| live[i]) {
                    continue;
                }
                let map: BTreeMap<u32, Term> = vars.iter().copied().zip(t.iter().map(|&i| terms[i].clone())).collect();
                let e = self.compile(&matrix.instantiate(&map));
                self.push(e, Expr::Const(Dyadic::ZERO));
            }
        }
        for i in 0..k {
            for l in i + 1..k {
                for j in 0..k {
                    if j == i || j == l || !(live[i] || live[l] || live[j]) {
                        continue;
                    }
                    let d = |a, b| Expr::Var(self.metric_var(a, b).unwrap());
                    let (lhs, rhs) = (d(i, l), Expr::Plus(Box::new(d(i, j)), Box::new(d(j, l))));
                    self.push(lhs, rhs);
                }
            }
        }
        let classical = req.theory.signature.classical;
        let sig = req.theory.signature.clone();
        for p in sig.predicates.iter().filter(|p| p.arity > 0) {
            let ts = tuples(k, p.arity);
            for a in &ts {
                let a_live = a.iter().any(|&i| live[i]);
                if classical {
                    // The metric is discrete: only single-position changes can bind.
                    for pos in 0..p.arity {
                        for x in (0..k).filter(|&x| x != a[pos]) {
                            if !(a_live || live[x]) {
                                continue;
                            }
                            let mut b = a.clone();
                            b[pos] = x;
                            self.push_modulus(&p.name, p.lipschitz, a, &b, &[pos]);
                        }
                    }
                } else {
                    for b in &ts {
                        let differing: Vec<usize> = (0..p.arity).filter(|&i| a[i] != b[i]).collect();
                        if differing.is_empty() || !(a_live || b.iter().any(|&i| live[i])) {
                            continue;
                        }
                        self.push_modulus(&p.name, p.lipschitz, a, b, &differing);
                    }
                }
            }
        }
        // Diagonal metric entries are constants; mark them assigned.
        for i in 0..k {
            let v = self.metric_base + i * k + i;
            self.val[v] = Some(Dyadic::ZERO);
            self.free[v] = false;
        }
        for i in 0..k {
            for j in 0..i {
                let v = self.metric_base + i * k + j;
                self.val[v] = Some(Dyadic::ZERO);
                self.free[v] = false;
            }
        }
    }

    /// `P(a) <= P(b) + L * max_i d(a_i, b_i)` over the differing positions.
    fn push_modulus(&mut self, p: &str, l: u64, a: &[usize], b: &[usize], differing: &[usize]) {
        let ds: Vec<Expr> = differing.iter().map(|&i| Expr::Var(self.metric_var(a[i], b[i]).unwrap())).collect();
        let modulus = Expr::Scale(l, Box::new(Expr::Max(ds)));
        let lhs = Expr::Var(self.pred_var(p, a));
        let rhs = Expr::Plus(Box::new(Expr::Var(self.pred_var(p, b))), Box::new(modulus));
        self.push(lhs, rhs);
    }

    fn order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nvars];
        let mut order = Vec::new();
        let mut visit = |v: usize, order: &mut Vec<usize>| {
            if self.free[v] && !seen[v] {
                seen[v] = true;
                order.push(v);
            }
        };
        let focus_first = self.req.bounds.iter().enumerate().sorted_by_key(|(_, b)| {
            !b.formula.witnesses().iter().any(|c| self.req.focus.contains(c))
        });
        for (i, _) in focus_first {
            let mut vs = Vec::new();
            self.constraints[i].lhs.vars(&mut vs);
            for v in vs {
                visit(v, &mut order);
            }
        }
        let k = self.names.len();
        for i in 0..k {
            for j in i + 1..k {
                visit(self.metric_var(i, j).unwrap(), &mut order);
            }
        }
        for v in 0..self.metric_base {
            visit(v, &mut order);
        }
        order
    }

    fn solve(mut self) -> Outcome {
        if !self.constraints.iter().all(|c| c.feasible(&self.val)) {
            return Outcome::Exhausted;
        }
        let order = self.order();
        match self.dfs(&order, 0) {
            Some(Some(s)) => Outcome::Sat(s),
            Some(None) => Outcome::Exhausted,
            None => Outcome::Budget,
        }
    }

    /// `None` on budget exhaustion; `Some(None)` when the subtree has no witness.
    fn dfs(&mut self, order: &[usize], depth: usize) -> Option<Option<FiniteStructure>> {
        if depth == order.len() {
            return Some(self.quotient());
        }
        let v = order[depth];
        let mut values = Vec::with_capacity(self.domain.len() + 1);
        if let Some(h) = self.hint[v] {
            if self.domain.contains(&h) {
                values.push(h);
            }
        }
        values.extend(self.domain.iter().copied().filter(|x| Some(*x) != self.hint[v]));
        for x in values {
            self.nodes += 1;
            if self.nodes > self.req.search.node_budget {
                self.val[v] = None;
                return None;
            }
            self.val[v] = Some(x);
            if self.watch[v].iter().all(|&c| self.constraints[c].feasible(&self.val)) {
                match self.dfs(order, depth + 1) {
                    Some(None) => {}
                    other => {
                        if other.is_none() {
                            self.val[v] = None;
                        }
                        return other;
                    }
                }
            }
        }
        self.val[v] = None;
        Some(None)
    }

    fn value(&self, v: usize) -> Dyadic {
        self.val[v].expect("complete assignment")
    }

    fn quotient(&self) -> Option<FiniteStructure> {
        let k = self.names.len();
        let mut class = vec![usize::MAX; k];
        let mut reps = Vec::new();
        for i in 0..k {
            if class[i] != usize::MAX {
                continue;
            }
            let c = reps.len();
            reps.push(i);
            class[i] = c;
            for j in i + 1..k {
                if class[j] == usize::MAX && self.value(self.metric_var(i, j).unwrap()).is_zero() {
                    class[j] = c;
                }
            }
        }
        let m = reps.len();
        if m > self.req.search.max_universe {
            return None;
        }
        let mut metric = vec![Dyadic::ZERO; m * m];
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    metric[a * m + b] = self.value(self.metric_var(reps[a], reps[b]).unwrap());
                }
            }
        }
        let mut predicates = BTreeMap::new();
        for (p, &(_, arity)) in &self.pred_offset {
            let table = tuples(m, arity)
                .iter()
                .map(|t| {
                    let orig: Vec<usize> = t.iter().map(|&c| reps[c]).collect();
                    self.value(self.pred_var(p, &orig))
                })
                .collect();
            predicates.insert(p.clone(), table);
        }
        let mut constants = BTreeMap::new();
        let mut functions = BTreeMap::new();
        for (i, n) in self.names.iter().enumerate() {
            match n {
                Name::Witness(ANON) => {}
                Name::Witness(c) => {
                    constants.insert(*c, class[i]);
                }
                Name::Const(s) => {
                    functions.insert(s.clone(), vec![class[i]]);
                }
            }
        }
        Some(FiniteStructure {
            universe: m,
            grid_exp: self.req.search.grid_exp,
            metric,
            predicates,
            functions,
            constants,
        })
    }
}

/// Enumerates universes `1..=N`, constant maps and all tables. Never reports exhaustion as complete.
fn element_search(req: &Request<'_>, uppers: &[Dyadic]) -> Outcome {
    let sig = &req.theory.signature;
    let consts: Vec<u32> = req.bounds.iter().flat_map(|b| b.formula.witnesses()).collect::<BTreeSet<_>>().into_iter().collect();
    let values = if sig.classical { vec![Dyadic::ZERO, Dyadic::ONE] } else { Dyadic::grid(req.search.grid_exp) };
    let mut nodes = 0u64;
    for n in 1..=req.search.max_universe {
        // Slots: constant images, function entries, metric pairs, predicate entries.
        let mut slots: Vec<usize> = Vec::new();
        slots.extend(consts.iter().map(|_| n));
        let fsizes: Vec<usize> = sig.functions.iter().map(|f| n.pow(f.arity as u32)).collect();
        slots.extend(std::iter::repeat_n(n, fsizes.iter().sum()));
        let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
        let positive = values.iter().filter(|v| !v.is_zero()).count();
        slots.extend(std::iter::repeat_n(positive, pairs.len()));
        let psizes: Vec<usize> = sig.predicates.iter().map(|p| n.pow(p.arity as u32)).collect();
        slots.extend(std::iter::repeat_n(values.len(), psizes.iter().sum()));
        let mut choice = vec![0usize; slots.len()];
        loop {
            nodes += 1;
            if nodes > req.search.node_budget {
                return Outcome::Budget;
            }
            let s = decode(req, &consts, n, &choice, &fsizes, &pairs, &psizes, &values);
            if s.validate(sig).is_ok() && req.theory.is_model(&s) && satisfies(&s, req.bounds, uppers) {
                return Outcome::Sat(s);
            }
            // Odometer increment.
            let mut i = 0;
            while i < slots.len() {
                choice[i] += 1;
                if choice[i] < slots[i] {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == slots.len() {
                break;
            }
        }
    }
    Outcome::Incomplete("function symbols: finite search is not complete".into())
}

#[allow(clippy::too_many_arguments)]
fn decode(
    req: &Request<'_>,
    consts: &[u32],
    n: usize,
    choice: &[usize],
    fsizes: &[usize],
    pairs: &[(usize, usize)],
    psizes: &[usize],
    values: &[Dyadic],
) -> FiniteStructure {
    let sig = &req.theory.signature;
    let mut it = choice.iter().copied();
    let constants = consts.iter().map(|&c| (c, it.next().unwrap())).collect();
    let functions = sig
        .functions
        .iter()
        .zip(fsizes)
        .map(|(f, &sz)| (f.name.clone(), (0..sz).map(|_| it.next().unwrap()).collect()))
        .collect();
    let positive: Vec<Dyadic> = values.iter().copied().filter(|v| !v.is_zero()).collect();
    let mut metric = vec![Dyadic::ZERO; n * n];
    for &(i, j) in pairs {
        let v = positive[it.next().unwrap()];
        metric[i * n + j] = v;
        metric[j * n + i] = v;
    }
    let predicates = sig
        .predicates
        .iter()
        .zip(psizes)
        .map(|(p, &sz)| (p.name.clone(), (0..sz).map(|_| values[it.next().unwrap()]).collect()))
        .collect();
    FiniteStructure { universe: n, grid_exp: req.search.grid_exp, metric, predicates, functions, constants }
}

/// Every bound holds with one grid step of slack.
pub(crate) fn satisfies(s: &FiniteStructure, bounds: &[Bound], uppers: &[Dyadic]) -> bool {
    bounds
        .iter()
        .zip(uppers)
        .all(|(b, u)| matches!(eval_sentence(&b.formula, s), Ok(v) if v <= *u))
}

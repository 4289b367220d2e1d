use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A term over variables `xN`, witness constants `cN` and function symbols.
///
/// Signature constants are zero-ary applications.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u32),
    Witness(u32),
    App(String, Vec<Term>),
}

/// Restricted continuous-logic formulas plus finite `join` (min) / `meet` (max) families.
///
/// Value `0` means "holds".
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atomic(String, Vec<Term>),
    Dist(Term, Term),
    /// `1 - phi`
    Neg(Box<Formula>),
    /// `phi / 2`
    Half(Box<Formula>),
    /// `min(1, phi + psi)`
    DotPlus(Box<Formula>, Box<Formula>),
    Sup(u32, Box<Formula>),
    Inf(u32, Box<Formula>),
    /// Minimum over a nonempty finite family.
    Join(Vec<Formula>),
    /// Maximum over a nonempty finite family.
    Meet(Vec<Formula>),
}

impl Term {
    pub fn var(i: u32) -> Term {
        Term::Var(i)
    }

    pub fn c(i: u32) -> Term {
        Term::Witness(i)
    }

    fn collect_vars(&self, out: &mut BTreeSet<u32>) {
        match self {
            Term::Var(v) => {
                out.insert(*v);
            }
            Term::Witness(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn collect_witnesses(&self, out: &mut BTreeSet<u32>) {
        match self {
            Term::Var(_) => {}
            Term::Witness(c) => {
                out.insert(*c);
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_witnesses(out)),
        }
    }

    pub fn substitute(&self, var: u32, by: &Term) -> Term {
        match self {
            Term::Var(v) if *v == var => by.clone(),
            Term::Var(_) | Term::Witness(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.substitute(var, by)).collect()),
        }
    }

    pub fn rename_witnesses(&self, map: &dyn Fn(u32) -> u32) -> Term {
        match self {
            Term::Var(_) => self.clone(),
            Term::Witness(c) => Term::Witness(map(*c)),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.rename_witnesses(map)).collect()),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Witness(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }
}

impl Formula {
    pub fn atom(p: &str, args: Vec<Term>) -> Formula {
        Formula::Atomic(p.to_string(), args)
    }

    pub fn dist(a: Term, b: Term) -> Formula {
        Formula::Dist(a, b)
    }

    pub fn neg(self) -> Formula {
        Formula::Neg(Box::new(self))
    }

    pub fn half(self) -> Formula {
        Formula::Half(Box::new(self))
    }

    pub fn dot_plus(self, other: Formula) -> Formula {
        Formula::DotPlus(Box::new(self), Box::new(other))
    }

    pub fn sup(var: u32, body: Formula) -> Formula {
        Formula::Sup(var, Box::new(body))
    }

    pub fn inf(var: u32, body: Formula) -> Formula {
        Formula::Inf(var, Box::new(body))
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::Atomic(..) | Formula::Dist(..))
    }

    pub fn free_vars(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<u32>) {
        match self {
            Formula::Atomic(_, args) => args.iter().for_each(|t| t.collect_vars(out)),
            Formula::Dist(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::Neg(f) | Formula::Half(f) => f.collect_free(out),
            Formula::DotPlus(a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
            Formula::Sup(v, f) | Formula::Inf(v, f) => {
                let mut inner = BTreeSet::new();
                f.collect_free(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
            Formula::Join(fs) | Formula::Meet(fs) => fs.iter().for_each(|f| f.collect_free(out)),
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Witness-constant indices mentioned anywhere in the formula.
    pub fn witnesses(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| t.collect_witnesses(&mut out));
        out
    }

    fn visit_terms(&self, f: &mut dyn FnMut(&Term)) {
        match self {
            Formula::Atomic(_, args) => args.iter().for_each(&mut *f),
            Formula::Dist(a, b) => {
                f(a);
                f(b);
            }
            Formula::Neg(g) | Formula::Half(g) | Formula::Sup(_, g) | Formula::Inf(_, g) => g.visit_terms(f),
            Formula::DotPlus(a, b) => {
                a.visit_terms(f);
                b.visit_terms(f);
            }
            Formula::Join(gs) | Formula::Meet(gs) => gs.iter().for_each(|g| g.visit_terms(f)),
        }
    }

    /// Atomic subformulas, in first-occurrence order without duplicates.
    pub fn atoms(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        self.collect_atoms(&mut out, &mut seen);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Formula>, seen: &mut BTreeSet<Formula>) {
        match self {
            Formula::Atomic(..) | Formula::Dist(..) => {
                if seen.insert(self.clone()) {
                    out.push(self.clone());
                }
            }
            Formula::Neg(g) | Formula::Half(g) | Formula::Sup(_, g) | Formula::Inf(_, g) => g.collect_atoms(out, seen),
            Formula::DotPlus(a, b) => {
                a.collect_atoms(out, seen);
                b.collect_atoms(out, seen);
            }
            Formula::Join(gs) | Formula::Meet(gs) => gs.iter().for_each(|g| g.collect_atoms(out, seen)),
        }
    }

    /// Replaces free occurrences of `var` by `by` (which must be ground or capture-free).
    pub fn substitute(&self, var: u32, by: &Term) -> Formula {
        match self {
            Formula::Atomic(p, args) => Formula::Atomic(p.clone(), args.iter().map(|t| t.substitute(var, by)).collect()),
            Formula::Dist(a, b) => Formula::Dist(a.substitute(var, by), b.substitute(var, by)),
            Formula::Neg(g) => Formula::Neg(Box::new(g.substitute(var, by))),
            Formula::Half(g) => Formula::Half(Box::new(g.substitute(var, by))),
            Formula::DotPlus(a, b) => Formula::DotPlus(Box::new(a.substitute(var, by)), Box::new(b.substitute(var, by))),
            Formula::Sup(v, _) | Formula::Inf(v, _) if *v == var => self.clone(),
            Formula::Sup(v, g) => Formula::Sup(*v, Box::new(g.substitute(var, by))),
            Formula::Inf(v, g) => Formula::Inf(*v, Box::new(g.substitute(var, by))),
            Formula::Join(gs) => Formula::Join(gs.iter().map(|g| g.substitute(var, by)).collect()),
            Formula::Meet(gs) => Formula::Meet(gs.iter().map(|g| g.substitute(var, by)).collect()),
        }
    }

    /// Substitutes several variables at once.
    pub fn instantiate(&self, map: &BTreeMap<u32, Term>) -> Formula {
        map.iter().fold(self.clone(), |f, (v, t)| f.substitute(*v, t))
    }

    pub fn rename_witnesses(&self, map: &dyn Fn(u32) -> u32) -> Formula {
        let rt = |t: &Term| t.rename_witnesses(map);
        match self {
            Formula::Atomic(p, args) => Formula::Atomic(p.clone(), args.iter().map(rt).collect()),
            Formula::Dist(a, b) => Formula::Dist(rt(a), rt(b)),
            Formula::Neg(g) => Formula::Neg(Box::new(g.rename_witnesses(map))),
            Formula::Half(g) => Formula::Half(Box::new(g.rename_witnesses(map))),
            Formula::DotPlus(a, b) => {
                Formula::DotPlus(Box::new(a.rename_witnesses(map)), Box::new(b.rename_witnesses(map)))
            }
            Formula::Sup(v, g) => Formula::Sup(*v, Box::new(g.rename_witnesses(map))),
            Formula::Inf(v, g) => Formula::Inf(*v, Box::new(g.rename_witnesses(map))),
            Formula::Join(gs) => Formula::Join(gs.iter().map(|g| g.rename_witnesses(map)).collect()),
            Formula::Meet(gs) => Formula::Meet(gs.iter().map(|g| g.rename_witnesses(map)).collect()),
        }
    }

    /// Quantifier nesting depth.
    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::Atomic(..) | Formula::Dist(..) => 0,
            Formula::Neg(g) | Formula::Half(g) => g.quantifier_depth(),
            Formula::DotPlus(a, b) => a.quantifier_depth().max(b.quantifier_depth()),
            Formula::Sup(_, g) | Formula::Inf(_, g) => 1 + g.quantifier_depth(),
            Formula::Join(gs) | Formula::Meet(gs) => gs.iter().map(Formula::quantifier_depth).max().unwrap_or(0),
        }
    }

    /// Connective nesting depth (atoms have depth 0).
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atomic(..) | Formula::Dist(..) => 0,
            Formula::Neg(g) | Formula::Half(g) | Formula::Sup(_, g) | Formula::Inf(_, g) => 1 + g.depth(),
            Formula::DotPlus(a, b) => 1 + a.depth().max(b.depth()),
            Formula::Join(gs) | Formula::Meet(gs) => 1 + gs.iter().map(Formula::depth).max().unwrap_or(0),
        }
    }

    /// Maximum number of nested `half` connectives on any path.
    pub fn half_depth(&self) -> u32 {
        match self {
            Formula::Atomic(..) | Formula::Dist(..) => 0,
            Formula::Half(g) => 1 + g.half_depth(),
            Formula::Neg(g) | Formula::Sup(_, g) | Formula::Inf(_, g) => g.half_depth(),
            Formula::DotPlus(a, b) => a.half_depth().max(b.half_depth()),
            Formula::Join(gs) | Formula::Meet(gs) => gs.iter().map(Formula::half_depth).max().unwrap_or(0),
        }
    }

    /// Smallest variable index not used (free or bound) in the formula.
    pub fn fresh_var(&self) -> u32 {
        let mut max = None;
        self.visit_vars(&mut |v| max = Some(max.map_or(v, |m: u32| m.max(v))));
        max.map_or(0, |m| m + 1)
    }

    fn visit_vars(&self, f: &mut dyn FnMut(u32)) {
        let mut terms = BTreeSet::new();
        self.visit_terms(&mut |t| t.collect_vars(&mut terms));
        terms.into_iter().for_each(&mut *f);
        self.visit_binders(f);
    }

    fn visit_binders(&self, f: &mut dyn FnMut(u32)) {
        match self {
            Formula::Atomic(..) | Formula::Dist(..) => {}
            Formula::Neg(g) | Formula::Half(g) => g.visit_binders(f),
            Formula::Sup(v, g) | Formula::Inf(v, g) => {
                f(*v);
                g.visit_binders(f);
            }
            Formula::DotPlus(a, b) => {
                a.visit_binders(f);
                b.visit_binders(f);
            }
            Formula::Join(gs) | Formula::Meet(gs) => gs.iter().for_each(|g| g.visit_binders(f)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "x{v}"),
            Term::Witness(c) => write!(f, "c{c}"),
            Term::App(name, args) if args.is_empty() => write!(f, "{name}"),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Ends in a quantifier whose body would swallow a following `(+)`.
fn open_ended(f: &Formula) -> bool {
    match f {
        Formula::Sup(..) | Formula::Inf(..) => true,
        Formula::Neg(g) | Formula::Half(g) => open_ended(g),
        Formula::DotPlus(_, r) => open_ended(r),
        _ => false,
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atomic(p, args) => {
                write!(f, "{p}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Formula::Dist(a, b) => write!(f, "d({a},{b})"),
            Formula::Neg(g) | Formula::Half(g) => {
                let op = if matches!(self, Formula::Neg(_)) { "~" } else { "half " };
                if matches!(**g, Formula::DotPlus(..)) {
                    write!(f, "{op}({g})")
                } else {
                    write!(f, "{op}{g}")
                }
            }
            Formula::DotPlus(a, b) => {
                if open_ended(a) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " (+) ")?;
                if matches!(**b, Formula::DotPlus(..)) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Formula::Sup(v, g) => write!(f, "sup x{v} . {g}"),
            Formula::Inf(v, g) => write!(f, "inf x{v} . {g}"),
            Formula::Join(gs) | Formula::Meet(gs) => {
                let kw = if matches!(self, Formula::Join(_)) { "join" } else { "meet" };
                write!(f, "{kw}{{")?;
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

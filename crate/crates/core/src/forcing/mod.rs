//! Strong, weak and game forcing values over finite extension worlds, narrowing, and generic
//! chains.

mod generic;
mod narrow;

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generic::{build_generic, compile_generic_model, GenericChain, Serviced};
pub use generic::genericity_gap;
pub use narrow::{bound_interval, narrow, narrow_in};

use crate::dyadic::Dyadic;
use crate::logic::classify::is_restricted;
use crate::logic::formula::{Formula, Term};
use crate::oracle::{move_pool_focused, Condition, Oracle, OracleError, Pool, PoolBudget};

/// Closed interval `[lo, hi]` inside `[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[Dyadic; 2]", from = "[Dyadic; 2]")]
pub struct Interval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

impl From<Interval> for [Dyadic; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl From<[Dyadic; 2]> for Interval {
    fn from([lo, hi]: [Dyadic; 2]) -> Self {
        Interval::new(lo, hi)
    }
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: Dyadic::ZERO, hi: Dyadic::ONE };

    pub fn new(lo: Dyadic, hi: Dyadic) -> Interval {
        assert!(lo <= hi, "interval bounds out of order: {lo} > {hi}");
        Interval { lo, hi }
    }

    pub fn point(v: Dyadic) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> Dyadic {
        self.hi.sub_sat(self.lo)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: Dyadic) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// `self ⊆ other` after widening `other` by `slack` on both sides.
    pub fn within(&self, other: &Interval, slack: Dyadic) -> bool {
        other.lo.sub_sat(slack) <= self.lo && self.hi <= other.hi.add(slack)
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: self.hi.one_minus(), hi: self.lo.one_minus() }
    }

    pub fn half(&self) -> Interval {
        Interval { lo: self.lo.half(), hi: self.hi.half() }
    }

    pub fn dot_plus(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo.dot_plus(o.lo), hi: self.hi.dot_plus(o.hi) }
    }

    pub fn min(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo.min(o.lo), hi: self.hi.min(o.hi) }
    }

    pub fn max(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Limits for one forcing computation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForcingBudget {
    pub pool: PoolBudget,
    /// Cap on formula depth; also the number of game rounds.
    pub depth: usize,
    pub memo: bool,
}

impl ForcingBudget {
    pub fn new(pool: PoolBudget, depth: usize) -> ForcingBudget {
        ForcingBudget { pool, depth, memo: true }
    }

    pub fn identity(depth: usize) -> ForcingBudget {
        ForcingBudget::new(PoolBudget::identity(), depth)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Strong,
    Weak,
    Game,
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strong" => Ok(Kind::Strong),
            "weak" => Ok(Kind::Weak),
            "game" => Ok(Kind::Game),
            other => Err(format!("unknown forcing kind `{other}` (expected strong, weak or game)")),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Strong => "strong",
            Kind::Weak => "weak",
            Kind::Game => "game",
        })
    }
}

/// Report document for one forcing query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForcingReport {
    pub kind: Kind,
    pub interval: Interval,
    pub pool_size: usize,
    pub depth: usize,
    pub exact: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForcingError {
    #[error("`{0}` is not a restricted sentence")]
    NotRestricted(String),
    #[error("`{0}` is not atomic")]
    NotAtomic(String),
    #[error("cannot certify narrowing step: {0}")]
    Narrowing(String),
    #[error("tracked sentence `{0}` was not serviced by the chain")]
    Unserviced(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// `min { r : phi < r in p }`, or 1 when `p` has no bound on `phi`.
pub fn f_p(p: &Condition, phi: &Formula) -> Result<Dyadic, ForcingError> {
    if !phi.is_atomic() || !phi.is_sentence() {
        return Err(ForcingError::NotAtomic(phi.to_string()));
    }
    Ok(p.f(phi))
}

/// A finite extension world: a pool together with its inclusion order.
pub struct World {
    pub pool: Pool,
    /// Members extending member `i` (including `i`).
    ext: Vec<Vec<usize>>,
    /// Maximal members extending member `i`.
    maximal: Vec<Vec<usize>>,
    memo: bool,
    strong_memo: RefCell<HashMap<(usize, Formula), Dyadic>>,
    game_memo: RefCell<HashMap<(usize, usize, Formula), Dyadic>>,
}

impl World {
    pub fn build(oracle: &Oracle, p: &Condition, budget: &ForcingBudget, focus: &[Formula]) -> Result<World, ForcingError> {
        let pool = move_pool_focused(oracle, p, &budget.pool, focus)?;
        Ok(World::from_pool(pool, budget.memo))
    }

    pub fn from_pool(pool: Pool, memo: bool) -> World {
        let n = pool.members.len();
        let ext: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| pool.members[j].extends(&pool.members[i])).collect())
            .collect();
        let is_max: Vec<bool> = (0..n).map(|i| ext[i].len() == 1).collect();
        let maximal = ext.iter().map(|e| e.iter().copied().filter(|&j| is_max[j]).collect()).collect();
        World {
            pool,
            ext,
            maximal,
            memo,
            strong_memo: RefCell::new(HashMap::new()),
            game_memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.pool.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &Condition {
        &self.pool.members[i]
    }

    pub fn extensions(&self, i: usize) -> &[usize] {
        &self.ext[i]
    }

    pub fn index_of(&self, q: &Condition) -> Option<usize> {
        self.pool.members.iter().position(|m| m == q)
    }

    fn window_terms(&self) -> Vec<Term> {
        self.pool.window.iter().map(|&c| Term::c(c)).collect()
    }

    /// Strong forcing value at member `i`.
    pub fn strong(&self, i: usize, phi: &Formula) -> Dyadic {
        if self.memo {
            if let Some(v) = self.strong_memo.borrow().get(&(i, phi.clone())) {
                return *v;
            }
        }
        let v = match phi {
            Formula::Atomic(..) | Formula::Dist(..) => self.member(i).f(phi),
            Formula::Neg(g) => self.ext[i].iter().map(|&j| self.strong(j, g)).min().unwrap_or(Dyadic::ONE).one_minus(),
            Formula::Half(g) => self.strong(i, g).half(),
            Formula::DotPlus(a, b) => self.strong(i, a).dot_plus(self.strong(i, b)),
            Formula::Join(gs) => gs.iter().map(|g| self.strong(i, g)).min().unwrap_or(Dyadic::ONE),
            Formula::Inf(x, g) => self
                .window_terms()
                .iter()
                .map(|c| self.strong(i, &g.substitute(*x, c)))
                .min()
                .unwrap_or(Dyadic::ONE),
            // Only the join/inf clauses are primitive; the duals go through negation.
            Formula::Meet(gs) => self.strong(i, &Formula::Join(gs.iter().cloned().map(Formula::neg).collect()).neg()),
            Formula::Sup(x, g) => self.strong(i, &Formula::inf(*x, (**g).clone().neg()).neg()),
        };
        if self.memo {
            self.strong_memo.borrow_mut().insert((i, phi.clone()), v);
        }
        v
    }

    /// `max_{q ⊇ p} min_{q' ⊇ q} F_{q'}`.
    pub fn weak(&self, i: usize, phi: &Formula) -> Dyadic {
        self.ext[i]
            .iter()
            .map(|&j| self.ext[j].iter().map(|&k| self.strong(k, phi)).min().unwrap_or(Dyadic::ONE))
            .max()
            .unwrap_or(Dyadic::ZERO)
    }

    /// Value of `phi` read off a maximal member, every atom at its bound-derived value.
    pub fn terminal(&self, m: usize, phi: &Formula) -> Dyadic {
        let terms = self.window_terms();
        match phi {
            Formula::Atomic(..) | Formula::Dist(..) => self.member(m).f(phi),
            Formula::Neg(g) => self.terminal(m, g).one_minus(),
            Formula::Half(g) => self.terminal(m, g).half(),
            Formula::DotPlus(a, b) => self.terminal(m, a).dot_plus(self.terminal(m, b)),
            Formula::Join(gs) => gs.iter().map(|g| self.terminal(m, g)).min().unwrap_or(Dyadic::ONE),
            Formula::Meet(gs) => gs.iter().map(|g| self.terminal(m, g)).max().unwrap_or(Dyadic::ZERO),
            Formula::Inf(x, g) => terms.iter().map(|c| self.terminal(m, &g.substitute(*x, c))).min().unwrap_or(Dyadic::ONE),
            Formula::Sup(x, g) => terms.iter().map(|c| self.terminal(m, &g.substitute(*x, c))).max().unwrap_or(Dyadic::ZERO),
        }
    }

    /// Minimax value of the `rounds`-round game from member `i`, `∀` to move.
    ///
    /// `∀` maximises, `∃` minimises; after the last round `∃` completes the play to the best
    /// maximal extension.
    pub fn game(&self, i: usize, phi: &Formula, rounds: usize) -> Dyadic {
        let key = (i, rounds, phi.clone());
        if self.memo {
            if let Some(v) = self.game_memo.borrow().get(&key) {
                return *v;
            }
        }
        let v = if rounds == 0 {
            self.maximal[i].iter().map(|&m| self.terminal(m, phi)).min().unwrap_or(Dyadic::ONE)
        } else {
            self.ext[i]
                .iter()
                .map(|&q| self.ext[q].iter().map(|&r| self.game(r, phi, rounds - 1)).min().unwrap_or(Dyadic::ONE))
                .max()
                .unwrap_or(Dyadic::ZERO)
        };
        if self.memo {
            self.game_memo.borrow_mut().insert(key, v);
        }
        v
    }
}

pub fn check_sentence(phi: &Formula) -> Result<(), ForcingError> {
    if !phi.is_sentence() || !is_restricted_or_family(phi) {
        return Err(ForcingError::NotRestricted(phi.to_string()));
    }
    Ok(())
}

/// Finite families are admitted by the forcing clauses on top of the restricted connectives.
fn is_restricted_or_family(phi: &Formula) -> bool {
    match phi {
        Formula::Join(gs) | Formula::Meet(gs) => !gs.is_empty() && gs.iter().all(is_restricted_or_family),
        Formula::Neg(g) | Formula::Half(g) | Formula::Sup(_, g) | Formula::Inf(_, g) => is_restricted_or_family(g),
        Formula::DotPlus(a, b) => is_restricted_or_family(a) && is_restricted_or_family(b),
        other => is_restricted(other),
    }
}

/// Computes one forcing value at `p` over the world spanned by the budget.
pub fn forcing_value(
    oracle: &Oracle,
    p: &Condition,
    phi: &Formula,
    budget: &ForcingBudget,
    kind: Kind,
) -> Result<ForcingReport, ForcingError> {
    check_sentence(phi)?;
    let world = World::build(oracle, p, budget, std::slice::from_ref(phi))?;
    Ok(report_on(&world, 0, phi, budget, kind, oracle.search.classical_exhaustive))
}

/// Report for member `i` of an already built world.
pub fn report_on(world: &World, i: usize, phi: &Formula, budget: &ForcingBudget, kind: Kind, exhaustive: bool) -> ForcingReport {
    let within_depth = phi.depth() <= budget.depth;
    let interval = if world.pool.truncated || !within_depth {
        Interval::UNIT
    } else {
        Interval::point(match kind {
            Kind::Strong => world.strong(i, phi),
            Kind::Weak => world.weak(i, phi),
            Kind::Game => world.game(i, phi, budget.depth.max(1)),
        })
    };
    ForcingReport {
        kind,
        interval,
        pool_size: world.len(),
        depth: budget.depth,
        exact: exhaustive && within_depth && !world.pool.truncated,
    }
}

pub fn strong_value(oracle: &Oracle, p: &Condition, phi: &Formula, b: &ForcingBudget) -> Result<ForcingReport, ForcingError> {
    forcing_value(oracle, p, phi, b, Kind::Strong)
}

pub fn weak_value(oracle: &Oracle, p: &Condition, phi: &Formula, b: &ForcingBudget) -> Result<ForcingReport, ForcingError> {
    forcing_value(oracle, p, phi, b, Kind::Weak)
}

pub fn game_value(oracle: &Oracle, p: &Condition, phi: &Formula, b: &ForcingBudget) -> Result<ForcingReport, ForcingError> {
    forcing_value(oracle, p, phi, b, Kind::Game)
}

/// Value of a sentence without witness constants at the empty condition.
pub fn companion_value(oracle: &Oracle, sigma: &Formula, b: &ForcingBudget) -> Result<ForcingReport, ForcingError> {
    if !sigma.witnesses().is_empty() {
        return Err(ForcingError::NotRestricted(sigma.to_string()));
    }
    game_value(oracle, &oracle.root(), sigma, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;
    use crate::oracle::{Bound, Theory};

    fn oracle(t: Theory) -> Oracle {
        Oracle::with_defaults(t)
    }

    fn f(o: &Oracle, s: &str) -> Formula {
        parse_formula(s, &o.theory.signature).unwrap()
    }

    #[test]
    fn f_p_examples() {
        let o = oracle(Theory::metric());
        let d = f(&o, "d(c0,c1)");
        let p = o
            .certify_bounds(&[Bound::new(d.clone(), "1/4".parse().unwrap()), Bound::new(d.clone(), "1/8".parse().unwrap())])
            .unwrap()
            .unwrap();
        assert_eq!(f_p(&p, &d).unwrap(), "1/8".parse().unwrap());
        assert_eq!(f_p(&o.root(), &d).unwrap(), Dyadic::ONE);
        assert!(f_p(&p, &d.clone().neg()).is_err());
    }

    #[test]
    fn half_and_atomic_strong() {
        let o = oracle(Theory::metric());
        let d = f(&o, "d(c0,c1)");
        let p = o.certify_bounds(&[Bound::new(d.clone(), "1/4".parse().unwrap())]).unwrap().unwrap();
        let b = ForcingBudget::identity(3);
        assert_eq!(strong_value(&o, &p, &d, &b).unwrap().interval, Interval::point("1/4".parse().unwrap()));
        assert_eq!(strong_value(&o, &p, &d.clone().half(), &b).unwrap().interval, Interval::point("1/8".parse().unwrap()));
    }

    #[test]
    fn identity_pool_weak_equals_strong() {
        let o = oracle(Theory::graphs());
        let phi = f(&o, "~E(c0,c1) (+) half E(c1,c2)");
        let b = ForcingBudget::identity(3);
        let p = o.root();
        assert_eq!(weak_value(&o, &p, &phi, &b).unwrap().interval, strong_value(&o, &p, &phi, &b).unwrap().interval);
    }

    #[test]
    fn negated_distance_with_exhaustive_pool() {
        // Pool over d(c0,c1) with threshold 1/2: {}, {d<1/2}, {~d<1/2}.
        let o = oracle(Theory::metric());
        let phi = f(&o, "~d(c0,c1)");
        let b = ForcingBudget::new(PoolBudget::new(1, vec![Dyadic::HALF], 2, 8), 3);
        let r = strong_value(&o, &o.root(), &phi, &b).unwrap();
        assert_eq!(r.pool_size, 3);
        assert_eq!(r.interval, Interval::point(Dyadic::HALF));
    }

    #[test]
    fn two_member_game_by_hand() {
        // World {p, p+{E<1/2}, p+{~E<1/2}}; a cap of 2 truncates it.
        let o = oracle(Theory::graphs());
        let e = f(&o, "E(c0,c1)");
        let b = ForcingBudget::new(PoolBudget::new(1, vec![Dyadic::HALF], 1, 3), 1);
        let r = game_value(&o, &o.root(), &e, &b).unwrap();
        assert_eq!(r.pool_size, 3);
        // ∀ plays the non-edge.
        assert_eq!(r.interval, Interval::point(Dyadic::ONE));
        let small = ForcingBudget::new(PoolBudget::new(1, vec![Dyadic::HALF], 1, 2), 1);
        assert_eq!(game_value(&o, &o.root(), &e, &small).unwrap().interval, Interval::UNIT);
    }
}

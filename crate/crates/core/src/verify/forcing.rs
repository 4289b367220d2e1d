use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Outcome;
use crate::dyadic::Dyadic;
use crate::forcing::{build_generic, compile_generic_model, narrow, report_on, weak_value, ForcingBudget, Kind, World};
use crate::logic::enumerate::{distinct_atoms, formulas};
use crate::logic::eval::eval_sentence;
use crate::logic::formula::{Formula, Term};
use crate::logic::parse::parse_formula;
use crate::oracle::pool::ground_atoms;
use crate::oracle::{Bound, Condition, Oracle, PoolBudget, Policy, SearchBounds, Theory};

pub const INSTANCES: usize = 200;
pub const TRIPLES: usize = 100;
/// Members allowed in a coincidence pool.
const POOL: usize = 8;
/// Formula depth, and recursion depth of the forcing computation.
const DEPTH: usize = 2;
const RECURSION: usize = 3;

/// One seeded forcing instance: an oracle, a base condition, a sentence and an exhaustive pool.
pub struct Instance {
    pub oracle: Arc<Oracle>,
    pub p: Condition,
    pub phi: Formula,
    pub budget: ForcingBudget,
}

impl Instance {
    pub fn world(&self) -> World {
        World::build(&self.oracle, &self.p, &self.budget, std::slice::from_ref(&self.phi)).expect("sampled pools certify")
    }

    pub fn describe(&self) -> String {
        let p: Vec<String> = self.p.canonical().iter().map(|b| b.to_string()).collect();
        format!("[{}] over {{{}}} on `{}`", self.oracle.theory.name, p.join(", "), self.phi)
    }
}

struct Sampler {
    theories: Vec<(Arc<Oracle>, Vec<Vec<Formula>>)>,
}

impl Sampler {
    fn new() -> Sampler {
        let theories = [Theory::metric(), Theory::graphs()]
            .into_iter()
            .map(|t| {
                let sentences = (1..=3u32)
                    .map(|n| formulas(&t.signature, &(0..n).collect::<Vec<_>>(), DEPTH, 1))
                    .collect();
                (Arc::new(Oracle::new(t.clone(), SearchBounds::for_theory(&t), Policy::Strict)), sentences)
            })
            .collect();
        Sampler { theories }
    }

    /// Draws instances until one has an untruncated pool of at most [`POOL`] members.
    fn draw(&self, rng: &mut ChaCha8Rng, which: usize) -> Instance {
        let (oracle, sentences) = &self.theories[which];
        let thresholds: Vec<Dyadic> = if oracle.theory.classical() {
            vec![Dyadic::HALF]
        } else {
            vec![Dyadic::new(1, 2), Dyadic::HALF, Dyadic::new(3, 2)]
        };
        loop {
            let n = rng.gen_range(1..=3u32);
            let phi = sentences[n as usize - 1].choose(rng).expect("nonempty enumeration").clone();
            let p = random_condition(oracle, rng, n, &thresholds);
            let atoms = ground_atoms(&phi, &crate::oracle::pool::window_for(&p, std::slice::from_ref(&phi), 0));
            let t = vec![*thresholds.choose(rng).expect("nonempty")];
            for adds in [2, 1] {
                let pool = PoolBudget::new(atoms.len(), t.clone(), adds, POOL).focused();
                let budget = ForcingBudget::new(pool, RECURSION);
                let inst = Instance { oracle: Arc::clone(oracle), p: p.clone(), phi: phi.clone(), budget };
                if !inst.world().pool.truncated {
                    return inst;
                }
            }
        }
    }
}

/// A certified condition of up to two bounds on atoms over `c0..c{n-1}`.
fn random_condition(oracle: &Oracle, rng: &mut ChaCha8Rng, n: u32, thresholds: &[Dyadic]) -> Condition {
    let terms: Vec<Term> = (0..n).map(Term::c).collect();
    let atoms = distinct_atoms(&oracle.theory.signature, &terms);
    let k = if atoms.is_empty() { 0 } else { rng.gen_range(0..=2usize) };
    let mut q = oracle.root();
    for _ in 0..k {
        let a = atoms.choose(rng).expect("nonempty").clone();
        let f = if rng.gen_bool(0.5) { a } else { a.neg() };
        let b = Bound::new(f, *thresholds.choose(rng).expect("nonempty"));
        if let Ok(Some(next)) = oracle.certify(&q, &[b]) {
            q = next;
        }
    }
    q
}

/// The seeded instance set shared by the coincidence and monotonicity suites.
///
/// Instances alternate between the metric-only and the graph pack.
pub fn instances(seed: u64, count: usize) -> Vec<Instance> {
    let sampler = Sampler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| sampler.draw(&mut rng, i % 2)).collect()
}

/// `game_value = weak_value` exactly, both as point intervals.
pub fn coincidence(seed: u64) -> Outcome {
    let mut problems = Vec::new();
    let set = instances(seed, INSTANCES);
    let mut sizes = 0;
    for inst in &set {
        let w = inst.world();
        sizes += w.len();
        let exhaustive = inst.oracle.search.classical_exhaustive;
        let g = report_on(&w, 0, &inst.phi, &inst.budget, Kind::Game, exhaustive).interval;
        let v = report_on(&w, 0, &inst.phi, &inst.budget, Kind::Weak, exhaustive).interval;
        if !(g.is_point() && v.is_point() && g == v) {
            problems.push(format!("{}: game {g}, weak {v}", inst.describe()));
        }
    }
    let detail = format!("{} instances, mean pool size {:.2}", set.len(), sizes as f64 / set.len() as f64);
    Outcome::check(problems.is_empty(), detail, &problems)
}

/// `game(q).hi <= game(p).hi` for every member `q` of the pool of `p`.
pub fn monotonicity(seed: u64) -> Outcome {
    let mut problems = Vec::new();
    let mut pairs = 0;
    let set = instances(seed, INSTANCES);
    for inst in &set {
        let w = inst.world();
        let rounds = inst.budget.depth.max(1);
        let top = w.game(0, &inst.phi, rounds);
        for &j in w.extensions(0) {
            pairs += 1;
            let v = w.game(j, &inst.phi, rounds);
            if v > top {
                problems.push(format!("{}: member {j} has {v} > {top}", inst.describe()));
            }
        }
    }
    Outcome::check(problems.is_empty(), format!("{} instances, {pairs} extension pairs", set.len()), &problems)
}

/// A seeded permutation of `c0..c5`.
fn shuffle(rng: &mut ChaCha8Rng) -> BTreeMap<u32, u32> {
    let mut img: Vec<u32> = (0..6).collect();
    img.shuffle(rng);
    (0..6).zip(img).collect()
}

/// `game_value(pi p, pi phi) = game_value(p, phi)` for permutations of the witness constants.
///
/// Pools draw every atom of the sentence with no fresh constants, so the budget is fixed by
/// the permutation.
pub fn homogeneity(seed: u64) -> Outcome {
    let sampler = Sampler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut problems = Vec::new();
    for i in 0..TRIPLES {
        let inst = sampler.draw(&mut rng, i % 2);
        let pi = shuffle(&mut rng);
        let map = |c: u32| *pi.get(&c).unwrap_or(&c);
        let Ok(Some(pp)) = inst.oracle.certify_bounds(&inst.p.rename_witnesses(&pi).canonical()) else {
            problems.push(format!("{}: image condition failed to certify", inst.describe()));
            continue;
        };
        let image = Instance { oracle: Arc::clone(&inst.oracle), p: pp, phi: inst.phi.rename_witnesses(&map), budget: inst.budget.clone() };
        let exhaustive = inst.oracle.search.classical_exhaustive;
        let (wa, wb) = (inst.world(), image.world());
        let a = report_on(&wa, 0, &inst.phi, &inst.budget, Kind::Game, exhaustive).interval;
        let b = report_on(&wb, 0, &image.phi, &image.budget, Kind::Game, exhaustive).interval;
        if a != b || wa.len() != wb.len() {
            problems.push(format!("{} under {pi:?}: {a} vs {b} (pools {} and {})", inst.describe(), wa.len(), wb.len()));
        }
    }
    Outcome::check(problems.is_empty(), format!("{TRIPLES} triples"), &problems)
}

/// The fixed seed conditions of the narrowing suite, as bound texts at threshold 1/2.
pub const NARROW_SEEDS: [&[&str]; 10] = [
    &[],
    &["E(c0,c1)"],
    &["~E(c0,c1)"],
    &["E(c0,c1)", "E(c1,c2)"],
    &["E(c0,c1)", "~E(c1,c2)", "E(c0,c2)"],
    &["~E(c0,c1)", "~E(c1,c2)", "~E(c0,c2)"],
    &["~d(c0,c1)"],
    &["d(c0,c1)"],
    &["d(c1,c2)", "E(c0,c1)"],
    &["~d(c0,c1)", "~d(c1,c2)", "~d(c0,c2)", "E(c0,c2)"],
];

/// Grid exponent of the narrowing oracle. Classical pins sit at the edge of `[0,1]`, so the
/// slack must stay below the smallest tolerance reached by splitting `1/8` over two
/// nested `(+)`.
pub const NARROW_GRID: u32 = 6;

/// Narrowing to width `< 1/8` succeeds and the weak value lands in the interval.
///
/// The containment check runs over the focused exhaustive pool of the narrowed condition and
/// allows one grid step.
pub fn narrowing(_seed: u64) -> Outcome {
    let theory = Theory::graphs();
    let mut search = SearchBounds::for_theory(&theory);
    search.grid_exp = NARROW_GRID;
    let oracle = Oracle::new(theory.clone(), search, Policy::Strict);
    let sentences = formulas(&theory.signature, &[0, 1, 2], DEPTH, 1);
    let eps = Dyadic::pow2_inv(3);
    let step = oracle.search.slack();
    let mut problems = Vec::new();
    let mut checked = 0;
    for seed in NARROW_SEEDS {
        let bounds: Vec<Bound> = seed
            .iter()
            .map(|s| Bound::new(parse_formula(s, &theory.signature).expect("seed atoms parse"), Dyadic::HALF))
            .collect();
        let p = oracle.certify_bounds(&bounds).expect("seed bounds validate").expect("seed conditions are satisfiable");
        for phi in &sentences {
            checked += 1;
            let (q, i) = match narrow(&oracle, &p, phi, eps) {
                Ok(r) => r,
                Err(e) => {
                    problems.push(format!("{seed:?} on `{phi}`: {e}"));
                    continue;
                }
            };
            if i.width() >= eps {
                problems.push(format!("{seed:?} on `{phi}`: width of {i}"));
            }
            let atoms = ground_atoms(phi, &crate::oracle::pool::window_for(&q, std::slice::from_ref(phi), 0));
            let b = ForcingBudget::new(PoolBudget::new(atoms.len(), vec![Dyadic::HALF], 1, 64).focused(), DEPTH);
            match weak_value(&oracle, &q, phi, &b) {
                Ok(r) if r.interval.within(&i, step) => {}
                Ok(r) => problems.push(format!("{seed:?} on `{phi}`: weak {} outside {i}", r.interval)),
                Err(e) => problems.push(format!("{seed:?} on `{phi}`: {e}")),
            }
        }
    }
    Outcome::check(problems.is_empty(), format!("{checked} (seed, sentence) pairs"), &problems)
}

/// The six-sentence schedule of the generic-model suite.
pub const GENERIC_SCHEDULE: [&str; 6] = [
    "E(c0,c1)",
    "~E(c1,c2)",
    "half E(c0,c2) (+) E(c2,c3)",
    "inf x0 . E(x0,c0)",
    "sup x0 . ~E(x0,c1)",
    "~d(c0,c3) (+) half half E(c1,c3)",
];

/// `build_generic` at `j = 4`: witness values lie in the forced intervals and every gap is
/// below `1 + 1/16`.
pub fn generic_model(_seed: u64) -> Outcome {
    let theory = Theory::graphs();
    let mut search = SearchBounds::for_theory(&theory);
    search.grid_exp = NARROW_GRID;
    let oracle = Oracle::new(theory.clone(), search, Policy::Strict);
    let schedule: Vec<Formula> =
        GENERIC_SCHEDULE.iter().map(|s| parse_formula(s, &theory.signature).expect("schedule parses")).collect();
    // Gaps read `~phi`, one connective deeper than the deepest scheduled sentence.
    let depth = schedule.iter().map(Formula::depth).max().unwrap_or(0) + 1;
    let budget = ForcingBudget::new(PoolBudget::new(4, vec![Dyadic::HALF], 1, 32).focused(), depth);
    let chain = match build_generic(&oracle, &oracle.root(), &schedule, 4, &budget) {
        Ok(c) => c,
        Err(e) => return Outcome::check(false, format!("chain failed: {e}"), &[]),
    };
    let compiled = match compile_generic_model(&chain, &schedule) {
        Ok(c) => c,
        Err(e) => return Outcome::check(false, format!("compilation failed: {e}"), &[]),
    };
    let limit = Dyadic::ONE.add(Dyadic::pow2_inv(4));
    let mut problems = Vec::new();
    for s in &chain.serviced {
        let v = eval_sentence(&s.formula, &compiled.witness).expect("schedule is over the signature");
        if !s.interval.contains(v) || !compiled.values[&s.formula].contains(v) {
            problems.push(format!("`{}` = {v} escapes {}", s.formula, s.interval));
        }
        if s.gap >= limit {
            problems.push(format!("`{}` has gap {}", s.formula, s.gap));
        }
    }
    let ok = problems.is_empty() && chain.is_chain() && chain.gaps_hold();
    Outcome::check(ok, format!("chain of {} members, {} sentences serviced", chain.chain.len(), chain.serviced.len()), &problems)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_deterministic_and_small() {
        let a = instances(7, 12);
        let b = instances(7, 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.describe(), y.describe());
            let w = x.world();
            assert!(w.len() <= POOL && !w.pool.truncated);
            assert!(x.phi.depth() <= DEPTH);
        }
    }
}

use criterion::{criterion_group, criterion_main, Criterion};

use forcegame::dyadic::Dyadic;
use forcegame::enforcers::EnforcerConfig;
use forcegame::forcing::{narrow, weak_value, ForcingBudget};
use forcegame::game::{play, RandomLegal};
use forcegame::logic::parse_formula;
use forcegame::oracle::{Bound, Oracle, Policy, PoolBudget, SearchBounds, Theory};
use forcegame::verify::forcing::NARROW_GRID;

fn oracle_check(c: &mut Criterion) {
    let theory = Theory::graphs();
    let sig = theory.signature.clone();
    let bounds: Vec<Bound> = ["E(c0,c1)", "E(c1,c2)", "~E(c0,c2)", "~d(c2,c3)"]
        .iter()
        .map(|f| Bound::new(parse_formula(f, &sig).unwrap(), Dyadic::HALF))
        .collect();
    c.bench_function("oracle/graph-4-bounds", |b| {
        // A fresh oracle per call so the cache does not answer.
        b.iter(|| Oracle::with_defaults(theory.clone()).check(&bounds).unwrap())
    });
}

fn forcing(c: &mut Criterion) {
    let oracle = Oracle::with_defaults(Theory::graphs());
    let phi = parse_formula("sup x0 . ~E(x0,c0)", &oracle.theory.signature).unwrap();
    let budget = ForcingBudget::new(PoolBudget::new(3, vec![Dyadic::HALF], 1, 64).focused(), 2);
    let root = oracle.root();
    c.bench_function("forcing/weak-depth-2", |b| b.iter(|| weak_value(&oracle, &root, &phi, &budget).unwrap()));
    // `(+)` halves the tolerance, so narrowing needs a grid finer than the default.
    let mut search = SearchBounds::for_theory(&oracle.theory);
    search.grid_exp = NARROW_GRID;
    let fine = Oracle::new(Theory::graphs(), search, Policy::Strict);
    let atom = parse_formula("half E(c0,c1) (+) ~E(c1,c2)", &fine.theory.signature).unwrap();
    let root = fine.root();
    c.bench_function("forcing/narrow", |b| b.iter(|| narrow(&fine, &root, &atom, Dyadic::pow2_inv(3)).unwrap()));
}

fn enforcement(c: &mut Criterion) {
    let mut g = c.benchmark_group("enforcement");
    g.sample_size(10);
    g.bench_function("graph-20-rounds", |b| {
        b.iter(|| {
            let oracle = Oracle::with_defaults(Theory::graphs());
            let mut e = EnforcerConfig::canonical_ec().build(&oracle.theory).unwrap();
            let mut a = RandomLegal::new(7, PoolBudget::new(4, vec![Dyadic::HALF], 1, 16).with_fresh(1));
            play(&oracle, &mut a, &mut e, 20)
        })
    });
    g.finish();
}

criterion_group!(benches, oracle_check, forcing, enforcement);
criterion_main!(benches);

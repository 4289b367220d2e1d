use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Outcome;
use crate::dyadic::Dyadic;
use crate::enforcers::{
    enforce_ec, enforce_extra_canonical_reserving, enforce_universal, extension_axioms, ledger_report, Density, EcItem,
};
use crate::game::{compile_loose, conjoin, play, transport, CompiledApprox, Mischief, Strategy, Transcript};
use crate::logic::derived::{abs_diff, max_all};
use crate::logic::formula::{Formula, Term};
use crate::oracle::{Oracle, PoolBudget, Policy, SearchBounds, Theory};
use crate::structures::FiniteStructure;

pub const ROUNDS: usize = 200;
const NAMED: u32 = 6;

fn edge(a: u32, b: u32) -> Formula {
    Formula::atom("E", vec![Term::c(a), Term::c(b)])
}

/// Result of one graph enforcement run.
pub struct GraphRun {
    pub transcript: Transcript,
    pub compiled: CompiledApprox,
    pub ledger: crate::enforcers::LedgerReport,
}

/// A seeded relabelling of `c0..c{n-1}`.
fn permutation(seed: u64, n: u32) -> BTreeMap<u32, u32> {
    let mut img: Vec<u32> = (0..n).collect();
    img.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..n).zip(img).collect()
}

/// `extra_canonical + universal + ec` against a seeded relabelling of `mischief`.
pub fn graph_run(seed: u64, rounds: usize) -> GraphRun {
    let theory = Theory::graphs();
    let oracle = Oracle::with_defaults(theory.clone());
    let canonical = enforce_extra_canonical_reserving(&[Density { center: 0, k: 1, copies: 1 }], NAMED);
    let universal = enforce_universal(&theory, NAMED, &[2]).expect("graph axioms are universal");
    let ec = enforce_ec(extension_axioms(NAMED, 3)).expect("extension axioms are existential");
    let mut exists = conjoin(vec![canonical, universal, ec], 4);
    let tracked: Vec<Formula> = (0..NAMED).permutations(2).map(|p| edge(p[0], p[1])).collect();
    let budget = PoolBudget::new(4, vec![Dyadic::pow2_inv(1)], 1, 16).with_fresh(1);
    let mut forall = transport(permutation(seed, NAMED), Mischief::new(tracked.clone(), budget));
    let transcript = play(&oracle, &mut forall, &mut exists, rounds);
    let compiled = compile_loose(transcript.last(), &tracked, Dyadic::ZERO).expect("strict runs carry witnesses");
    let ledger = ledger_report(&exists, transcript.last());
    let _ = forall.name();
    GraphRun { transcript, compiled, ledger }
}

/// [`graph_run`], memoised per process so suites sharing a seed play it once.
pub fn shared_graph_run(seed: u64, rounds: usize) -> Arc<GraphRun> {
    static RUNS: OnceLock<Mutex<HashMap<(u64, usize), Arc<GraphRun>>>> = OnceLock::new();
    let runs = RUNS.get_or_init(Default::default);
    if let Some(r) = runs.lock().expect("run memo poisoned").get(&(seed, rounds)) {
        return Arc::clone(r);
    }
    let run = Arc::new(graph_run(seed, rounds));
    runs.lock().expect("run memo poisoned").insert((seed, rounds), Arc::clone(&run));
    run
}

/// Extension-axiom and graph-axiom failures of a compiled graph, or an empty list.
pub fn graph_violations(c: &CompiledApprox) -> Vec<String> {
    let w = &c.witness;
    let named: BTreeSet<usize> = c.constants.iter().filter_map(|&k| c.element(k)).collect();
    let firsts: BTreeSet<usize> = (0..NAMED).filter_map(|k| c.element(k)).collect();
    let e = |a: usize, b: usize| w.pred("E", &[a, b]).expect("graph signature");
    let mut out = Vec::new();
    if firsts.len() < NAMED as usize {
        out.push(format!("only {} of the first {NAMED} constants name distinct vertices", firsts.len()));
    }
    for &v in &named {
        if e(v, v) != Dyadic::ONE {
            out.push(format!("loop at element {v}"));
        }
        for &u in &named {
            if e(u, v) != e(v, u) {
                out.push(format!("asymmetric edge {u},{v}"));
            }
        }
    }
    let firsts: Vec<usize> = firsts.into_iter().collect();
    for size in 1..=3.min(firsts.len()) {
        for support in firsts.iter().copied().combinations(size) {
            for mask in 0..(1u32 << size) {
                let ok = named.iter().any(|&y| {
                    !support.contains(&y)
                        && support.iter().enumerate().all(|(i, &x)| {
                            let adjacent = e(x, y).is_zero();
                            adjacent == (mask & (1 << i) != 0)
                        })
                });
                if !ok {
                    out.push(format!("no witness for support {support:?} mask {mask:b}"));
                }
            }
        }
    }
    out
}

pub fn random_graph(seed: u64) -> Outcome {
    let run = shared_graph_run(seed, ROUNDS);
    let v = graph_violations(&run.compiled);
    let detail = format!(
        "{} moves, {} named constants, ledger done/flagged/pending {}/{}/{}",
        run.transcript.len(),
        run.compiled.constants.len(),
        run.ledger.done,
        run.ledger.flagged,
        run.ledger.pending
    );
    Outcome::check(v.is_empty() && run.ledger.unverified.is_empty(), detail, &v)
}

/// Pinned cluster size for the metric suite: `c0` and three copies.
const CLUSTER: u32 = 4;

/// `inf y . max_i |d(c_i, y) - r_i|` for a distance profile `r`.
pub fn profile_formula(r: &[Dyadic]) -> Formula {
    let lits = r
        .iter()
        .enumerate()
        .map(|(i, &ri)| abs_diff(Formula::dist(Term::c(i as u32), Term::var(0)), constant(ri)))
        .collect();
    Formula::inf(0, max_all(lits))
}

/// The restricted sentence with constant value `r` (a dyadic in `[0,1]`).
pub fn constant(r: Dyadic) -> Formula {
    // `d(c, c) = 0`; halves of `~0 = 1` build every dyadic by binary expansion.
    let zero = Formula::dist(Term::c(0), Term::c(0));
    if r.is_zero() {
        return zero;
    }
    let one = zero.clone().neg();
    let mut acc: Option<Formula> = None;
    let e = r.exponent();
    let n = r.numerator();
    for bit in 0..=e {
        if n >> (e - bit) & 1 == 1 {
            let mut t = one.clone();
            for _ in 0..bit {
                t = t.half();
            }
            acc = Some(match acc {
                None => t,
                Some(a) => a.dot_plus(t),
            });
        }
    }
    acc.expect("nonzero dyadic")
}

/// Profiles on the `1/16` grid with `|r_i - r_0| <= 1/16`: the only ones compatible with the
/// cluster bounds `d(c_i, c_0) < 1/8` witnessed at slack `1/16`.
pub fn cluster_profiles() -> Vec<Vec<Dyadic>> {
    let g = 4u32;
    let step = 1i64;
    let top = 1i64 << g;
    let mut out = Vec::new();
    for r0 in 0..=top {
        let others = (1..CLUSTER).map(|_| (r0 - step).max(0)..=(r0 + step).min(top)).multi_cartesian_product();
        for rest in others {
            let mut p = vec![r0];
            p.extend(rest);
            out.push(p.into_iter().map(|k| Dyadic::new(k as u64, g)).collect());
        }
    }
    out
}

pub struct MetricRun {
    pub transcript: Transcript,
    pub compiled: CompiledApprox,
    pub ledger: crate::enforcers::LedgerReport,
}

pub fn metric_run(seed: u64, rounds: usize) -> MetricRun {
    let theory = Theory::metric();
    let oracle = Oracle::new(theory.clone(), SearchBounds::new(24, 4), Policy::Strict);
    let canonical = enforce_extra_canonical_reserving(&[Density { center: 0, k: 3, copies: 3 }], 0);
    let universal = enforce_universal(&theory, CLUSTER, &[2]).expect("metric pack has no axioms");
    let items = cluster_profiles()
        .iter()
        .map(|r| EcItem { phi: profile_formula(r), tuple: vec![], r: Dyadic::new(3, 4) })
        .collect();
    let ec = enforce_ec(items).expect("profile formulas are existential");
    let mut exists = conjoin(vec![canonical, universal, ec], 8);
    let tracked: Vec<Formula> =
        (0..CLUSTER).combinations(2).map(|p| Formula::dist(Term::c(p[0]), Term::c(p[1]))).collect();
    let budget = PoolBudget::new(4, vec![Dyadic::pow2_inv(1)], 1, 8);
    let mut forall = transport(permutation(seed, CLUSTER), Mischief::new(tracked.clone(), budget));
    let transcript = play(&oracle, &mut forall, &mut exists, rounds);
    let compiled = compile_loose(transcript.last(), &tracked, Dyadic::ZERO).expect("strict runs carry witnesses");
    let ledger = ledger_report(&exists, transcript.last());
    MetricRun { transcript, compiled, ledger }
}

/// Every on-grid one-point extension profile of the first four constants.
pub fn extension_profiles(w: &FiniteStructure, pinned: &[usize], g: u32) -> Vec<Vec<Dyadic>> {
    let grid = Dyadic::grid(g);
    (0..pinned.len())
        .map(|_| grid.iter().copied())
        .multi_cartesian_product()
        .filter(|r| {
            pinned.iter().enumerate().all(|(i, &a)| {
                pinned.iter().enumerate().all(|(j, &b)| {
                    let d = w.dist(a, b);
                    d <= r[i].add(r[j]) && r[i] <= r[j].add(d)
                })
            })
        })
        .collect()
}

/// Extension profiles with no named element within `tol`.
pub fn uncovered(c: &CompiledApprox, tol: Dyadic) -> Vec<Vec<Dyadic>> {
    let w = &c.witness;
    let pinned: Vec<usize> = (0..CLUSTER).filter_map(|k| c.element(k)).collect();
    let named: BTreeSet<usize> = c.constants.iter().filter_map(|&k| c.element(k)).collect();
    extension_profiles(w, &pinned, 4)
        .into_iter()
        .filter(|r| {
            !named.iter().any(|&y| pinned.iter().zip(r).all(|(&a, &ri)| w.dist(a, y).abs_diff(ri) <= tol))
        })
        .collect()
}

pub fn metric(seed: u64) -> Outcome {
    let run = metric_run(seed, ROUNDS);
    let missing = uncovered(&run.compiled, Dyadic::pow2_inv(3));
    let pinned = (0..CLUSTER).all(|k| run.compiled.element(k).is_some());
    let detail = format!(
        "{} moves, {} named constants, ledger done/flagged/pending {}/{}/{}",
        run.transcript.len(),
        run.compiled.constants.len(),
        run.ledger.done,
        run.ledger.flagged,
        run.ledger.pending
    );
    let problems: Vec<String> = missing.iter().take(5).map(|r| format!("uncovered profile {r:?}")).collect();
    Outcome::check(pinned && missing.is_empty() && run.ledger.unverified.is_empty(), detail, &problems)
}

use itertools::Itertools;

use super::enforcement::{shared_graph_run, ROUNDS};
use super::Outcome;
use crate::dyadic::Dyadic;
use crate::enforcers::{backforth_compare, enforce_finite_generic, BackForthFailure};
use crate::forcing::bound_interval;
use crate::game::{
    compile_loose, conjoin, lift_constants, lift_pairwise, play, play_splitting, CompiledApprox, OppositeAtom, RandomLegal,
    Stall, StallSplit, Strategy, TaskStrategy, Transcript,
};
use crate::logic::formula::{Formula, Term};
use crate::oracle::{Bound, Condition, Oracle, PoolBudget, Theory};

pub const CONJUNCTION_SEEDS: u64 = 50;
/// Rounds allowed to each strategy alone, and to the conjunction.
pub const SOLO_ROUNDS: usize = 4;
pub const JOINT_ROUNDS: usize = 8;
pub const SPLIT_DEPTH: usize = 3;
pub const BACKFORTH_DEPTH: usize = 4;

fn edge(a: u32, b: u32) -> Formula {
    Formula::atom("E", vec![Term::c(a), Term::c(b)])
}

/// Pins of the conjunction suite: each atom to width `< 1/8`.
fn pins() -> [(Formula, Dyadic); 2] {
    [(edge(0, 1), Dyadic::pow2_inv(3)), (edge(1, 2), Dyadic::pow2_inv(3))]
}

fn pinned(q: &Condition, pins: &[(Formula, Dyadic)]) -> bool {
    pins.iter().all(|(a, eps)| bound_interval(q, a).width() < *eps)
}

fn pinning(pins: &[(Formula, Dyadic)]) -> TaskStrategy {
    enforce_finite_generic(pins.to_vec()).expect("atoms are restricted sentences")
}

fn adversary(seed: u64) -> RandomLegal {
    RandomLegal::new(seed, PoolBudget::new(4, vec![Dyadic::HALF], 1, 16).with_fresh(1))
}

/// Plays `exists` against `random-legal` and reports whether the pins hold with every task
/// done and verified.
fn achieves(oracle: &Oracle, seed: u64, mut exists: TaskStrategy, pins: &[(Formula, Dyadic)], rounds: usize) -> Result<(), String> {
    let mut forall = adversary(seed);
    let t = play(oracle, &mut forall, &mut exists, rounds);
    if let Some(f) = &t.forfeit {
        return Err(format!("forfeit by {:?}: {}", f.side, f.reason));
    }
    let last = t.last();
    if !exists.all_done() || !exists.unverified(last).is_empty() {
        return Err(format!("ledger {:?}", exists.ledger().iter().map(|e| e.status.clone()).collect::<Vec<_>>()));
    }
    if !pinned(last, pins) {
        return Err("pins do not hold on the last condition".into());
    }
    Ok(())
}

/// Two pinning strategies, each within four rounds alone, jointly within eight via `conjoin`.
pub fn conjunction(seed: u64) -> Outcome {
    let oracle = Oracle::with_defaults(Theory::graphs());
    let [a, b] = pins();
    let mut problems = Vec::new();
    for s in seed..seed + CONJUNCTION_SEEDS {
        let runs = [
            ("left", achieves(&oracle, s, pinning(std::slice::from_ref(&a)), std::slice::from_ref(&a), SOLO_ROUNDS)),
            ("right", achieves(&oracle, s, pinning(std::slice::from_ref(&b)), std::slice::from_ref(&b), SOLO_ROUNDS)),
            (
                "joint",
                achieves(
                    &oracle,
                    s,
                    conjoin(vec![pinning(std::slice::from_ref(&a)), pinning(std::slice::from_ref(&b))], 1),
                    &[a.clone(), b.clone()],
                    JOINT_ROUNDS,
                ),
            ),
        ];
        for (which, r) in runs {
            if let Err(e) = r {
                problems.push(format!("seed {s}, {which}: {e}"));
            }
        }
    }
    Outcome::check(problems.is_empty(), format!("{CONJUNCTION_SEEDS} seeds, 3 runs each"), &problems)
}

/// Classical value of `atom` in the compilation of a leaf.
fn leaf_value(t: &Transcript, atom: &Formula) -> Result<Dyadic, String> {
    let c = compile_loose(t.last(), std::slice::from_ref(atom), Dyadic::ZERO).map_err(|e| e.to_string())?;
    c.value(atom).ok_or_else(|| format!("`{atom}` has no value"))
}

/// Depth-3 splitting run of the lifted opposite-atom pair strategy.
pub fn splitting(_seed: u64) -> Outcome {
    let oracle = Oracle::with_defaults(Theory::graphs());
    let mut exists = lift_pairwise(SPLIT_DEPTH, |_| Box::new(OppositeAtom { atom: edge(0, 1), threshold: Dyadic::HALF }));
    let sites = exists.instance_sites();
    let tree = play_splitting(&oracle, &mut exists, &mut StallSplit, SPLIT_DEPTH);
    let leaves = tree.leaves();
    let mut problems = Vec::new();
    if leaves.len() != 1 << SPLIT_DEPTH {
        problems.push(format!("{} leaves", leaves.len()));
    }
    if !tree.prefixes_shared() {
        problems.push("a child transcript does not extend its parent's".into());
    }
    for (i, t) in leaves.iter().enumerate() {
        if let Some(f) = &t.forfeit {
            problems.push(format!("leaf {i} forfeited by {:?}: {}", f.side, f.reason));
        }
    }
    let mut pairs = 0;
    for (a, b) in (0..leaves.len()).tuple_combinations() {
        pairs += 1;
        let level = tree.divergence(a, b);
        let node = tree.ancestor(a, level - 1);
        let Some(idx) = sites.iter().position(|&s| s == (level, node)) else {
            problems.push(format!("no instance at split {level}/{node}"));
            continue;
        };
        let (x, y) = lift_constants(idx);
        let atom = edge(x, y);
        match (leaf_value(&leaves[a], &atom), leaf_value(&leaves[b], &atom)) {
            (Ok(u), Ok(v)) if u != v => {}
            (Ok(u), Ok(_)) => problems.push(format!("leaves {a},{b} agree on `{atom}` = {u}")),
            (Err(e), _) | (_, Err(e)) => problems.push(format!("leaves {a},{b}: {e}")),
        }
    }
    let detail = format!("{} leaves, {pairs} leaf pairs, {} instances", leaves.len(), sites.len());
    Outcome::check(problems.is_empty() && pairs == 28, detail, &problems)
}

/// Proposes `last` together with a fixed bound set.
struct Fixed(Vec<Bound>);

impl Strategy for Fixed {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn propose(&mut self, oracle: &Oracle, t: &Transcript) -> Condition {
        oracle.certify(t.last(), &self.0).ok().flatten().unwrap_or_else(|| t.last().clone())
    }
}

/// A compiled graph with no edges among `c0..c5`.
pub fn edgeless_compilation() -> CompiledApprox {
    let oracle = Oracle::with_defaults(Theory::graphs());
    let tracked: Vec<Formula> = (0..6u32).permutations(2).map(|p| edge(p[0], p[1])).collect();
    let bounds: Vec<Bound> = (0..6u32)
        .tuple_combinations()
        .flat_map(|(i, j)| [Bound::new(edge(i, j).neg(), Dyadic::HALF), Bound::new(Formula::dist(Term::c(i), Term::c(j)).neg(), Dyadic::HALF)])
        .collect();
    let t = play(&oracle, &mut Stall, &mut Fixed(bounds), 1);
    compile_loose(t.last(), &tracked, Dyadic::ZERO).expect("strict runs carry witnesses")
}

fn describe(f: &BackForthFailure) -> String {
    format!(
        "step {} ({:?}) unmatched {:?} against {:?}, exhausted {}",
        f.step, f.side, f.tuple_a, f.tuple_b, f.exhausted
    )
}

/// Two seeded random-graph runs are back-and-forth equivalent at depth 4; a run and the
/// edgeless compilation are not, with a type separating them.
pub fn backforth(seed: u64) -> Outcome {
    let sig = Theory::graphs().signature;
    let a = &shared_graph_run(seed, ROUNDS).compiled;
    let b = &shared_graph_run(seed + 1, ROUNDS).compiled;
    let edgeless = edgeless_compilation();
    let mut problems = Vec::new();
    let same = backforth_compare(a, b, &sig, BACKFORTH_DEPTH, Dyadic::ZERO);
    match &same {
        Ok(_) => {}
        Err(f) => problems.push(format!("runs {seed} and {}: {}", seed + 1, describe(f))),
    }
    let apart = backforth_compare(a, &edgeless, &sig, BACKFORTH_DEPTH, Dyadic::ZERO);
    let separated = match &apart {
        Ok(_) => {
            problems.push("run matched the edgeless compilation".into());
            None
        }
        Err(f) if f.etype_a.formulas.is_empty() => {
            problems.push(format!("failure carries no type: {}", describe(f)));
            None
        }
        Err(f) => Some(describe(f)),
    };
    let detail = format!("equivalent runs: {}; edgeless: {}", same.is_ok(), separated.unwrap_or_else(|| "matched".into()));
    Outcome::check(problems.is_empty(), detail, &problems)
}

use std::collections::BTreeMap;

use super::strategy::Strategy;
use super::transcript::{legal_move, Side, Transcript};
use crate::dyadic::Dyadic;
use crate::logic::formula::Formula;
use crate::oracle::{Bound, Condition, Oracle};

/// Plays `rounds` rounds from the empty condition, `∀` first.
pub fn play(oracle: &Oracle, forall: &mut dyn Strategy, exists: &mut dyn Strategy, rounds: usize) -> Transcript {
    play_from(oracle, Transcript::new(0, oracle.root()), forall, exists, rounds)
}

/// Continues `t` for `rounds` more rounds. An illegal proposal ends the board with a forfeit by
/// the proposing side.
pub fn play_from(
    oracle: &Oracle,
    mut t: Transcript,
    forall: &mut dyn Strategy,
    exists: &mut dyn Strategy,
    rounds: usize,
) -> Transcript {
    for _ in 0..rounds {
        for side in [Side::Forall, Side::Exists] {
            if t.is_over() {
                return t;
            }
            step(oracle, &mut t, side, if side == Side::Forall { &mut *forall } else { &mut *exists });
        }
    }
    t
}

fn step(oracle: &Oracle, t: &mut Transcript, side: Side, s: &mut dyn Strategy) {
    debug_assert_eq!(t.turn(), side);
    let q = s.propose(oracle, t);
    match legal_move(oracle, t, &q) {
        Ok(c) => t.push(c),
        Err(r) => t.record_forfeit(side, r.to_string()),
    }
}

/// One side's behaviour on several independent boards.
pub trait MultiStrategy {
    fn propose_multi(&mut self, oracle: &Oracle, boards: &[Transcript]) -> Vec<Condition>;
}

/// Independent single-board strategies, one per board.
pub struct PerBoard(pub Vec<Box<dyn Strategy>>);

impl MultiStrategy for PerBoard {
    fn propose_multi(&mut self, oracle: &Oracle, boards: &[Transcript]) -> Vec<Condition> {
        boards.iter().zip(self.0.iter_mut()).map(|(t, s)| s.propose(oracle, t)).collect()
    }
}

/// Plays `boards` independent boards in lockstep; a forfeit ends only its own board.
pub fn play_multi(
    oracle: &Oracle,
    boards: usize,
    forall: &mut dyn MultiStrategy,
    exists: &mut dyn MultiStrategy,
    rounds: usize,
) -> Vec<Transcript> {
    let root = oracle.root();
    let mut ts: Vec<Transcript> = (0..boards).map(|b| Transcript::new(b, root.clone())).collect();
    for _ in 0..rounds {
        for side in [Side::Forall, Side::Exists] {
            let s: &mut dyn MultiStrategy = if side == Side::Forall { &mut *forall } else { &mut *exists };
            let proposals = s.propose_multi(oracle, &ts);
            for (t, q) in ts.iter_mut().zip(proposals) {
                if t.is_over() {
                    continue;
                }
                match legal_move(oracle, t, &q) {
                    Ok(c) => t.push(c),
                    Err(r) => t.record_forfeit(side, r.to_string()),
                }
            }
        }
    }
    ts
}

/// `∀` in the splitting game: opens the root and splits every node in two.
pub trait TreeAdversary {
    fn open(&mut self, _oracle: &Oracle, origin: &Condition) -> Condition {
        origin.clone()
    }
    fn split(&mut self, oracle: &Oracle, t: &Transcript, level: usize, node: usize) -> (Condition, Condition);
}

/// `∃` in the splitting game: answers on every node of a level at once.
pub trait TreeStrategy {
    fn respond(&mut self, oracle: &Oracle, level: usize, nodes: &[Transcript]) -> Vec<Condition>;
}

/// Splits every node into two copies of itself.
#[derive(Clone, Debug, Default)]
pub struct StallSplit;

impl TreeAdversary for StallSplit {
    fn split(&mut self, _oracle: &Oracle, t: &Transcript, _level: usize, _node: usize) -> (Condition, Condition) {
        (t.last().clone(), t.last().clone())
    }
}

/// Stalls on every node.
#[derive(Clone, Debug, Default)]
pub struct StallTree;

impl TreeStrategy for StallTree {
    fn respond(&mut self, _oracle: &Oracle, _level: usize, nodes: &[Transcript]) -> Vec<Condition> {
        nodes.iter().map(|t| t.last().clone()).collect()
    }
}

/// A full binary tree of boards; `levels[j]` holds the `2^j` nodes after split level `j`.
///
/// Node `b` at level `j` has children `2b` and `2b + 1`; the bit of `b` for level `i <= j` is
/// bit `j - i`.
#[derive(Clone, Debug)]
pub struct SplitTree {
    pub depth: usize,
    pub levels: Vec<Vec<Transcript>>,
}

impl SplitTree {
    pub fn leaves(&self) -> &[Transcript] {
        &self.levels[self.depth]
    }

    /// Split level at which leaves `a != b` part ways (1-based).
    pub fn divergence(&self, a: usize, b: usize) -> usize {
        let diff = a ^ b;
        self.depth - (usize::BITS - 1 - diff.leading_zeros()) as usize
    }

    /// Ancestor at `level` of the leaf `leaf`.
    pub fn ancestor(&self, leaf: usize, level: usize) -> usize {
        leaf >> (self.depth - level)
    }

    /// Every child's transcript begins with its parent's verbatim.
    pub fn prefixes_shared(&self) -> bool {
        (1..=self.depth).all(|j| {
            self.levels[j].iter().enumerate().all(|(b, t)| {
                let parent = &self.levels[j - 1][b / 2];
                t.moves.len() >= parent.moves.len()
                    && t.moves[..parent.moves.len()] == parent.moves[..]
                    && t.origin == parent.origin
            })
        })
    }
}

/// Runs the splitting game: `∀` opens, `∃` answers, then at each of `depth` split levels `∀`
/// plays two extensions of every node and `∃` answers on each child.
pub fn play_splitting(
    oracle: &Oracle,
    exists: &mut dyn TreeStrategy,
    forall: &mut dyn TreeAdversary,
    depth: usize,
) -> SplitTree {
    let root = oracle.root();
    let mut t = Transcript::new(0, root.clone());
    let open = forall.open(oracle, &root);
    apply(oracle, &mut t, Side::Forall, open);
    let mut level = vec![t];
    respond(oracle, exists, 0, &mut level);
    let mut levels = vec![level];
    for j in 1..=depth {
        let prev = &levels[j - 1];
        let mut next = Vec::with_capacity(prev.len() * 2);
        for (b, t) in prev.iter().enumerate() {
            let (q0, q1) = if t.is_over() { (t.last().clone(), t.last().clone()) } else { forall.split(oracle, t, j, b) };
            for (k, q) in [q0, q1].into_iter().enumerate() {
                let mut child = t.clone();
                child.board = 2 * b + k;
                if !child.is_over() {
                    apply(oracle, &mut child, Side::Forall, q);
                }
                next.push(child);
            }
        }
        respond(oracle, exists, j, &mut next);
        levels.push(next);
    }
    SplitTree { depth, levels }
}

fn apply(oracle: &Oracle, t: &mut Transcript, side: Side, q: Condition) {
    match legal_move(oracle, t, &q) {
        Ok(c) => t.push(c),
        Err(r) => t.record_forfeit(side, r.to_string()),
    }
}

fn respond(oracle: &Oracle, exists: &mut dyn TreeStrategy, level: usize, nodes: &mut [Transcript]) {
    let answers = exists.respond(oracle, level, nodes);
    for (t, q) in nodes.iter_mut().zip(answers) {
        if !t.is_over() {
            apply(oracle, t, Side::Exists, q);
        }
    }
}

/// A two-board strategy: proposes additions for both boards of a pair.
pub trait PairStrategy: Send {
    fn name(&self) -> String;
    fn propose_pair(&mut self, oracle: &Oracle, left: &Transcript, right: &Transcript) -> (Vec<Bound>, Vec<Bound>);
}

/// Forces `atom` to opposite classical values: `atom < r` on the left, `~atom < r` on the right.
#[derive(Clone, Debug)]
pub struct OppositeAtom {
    pub atom: Formula,
    pub threshold: Dyadic,
}

impl PairStrategy for OppositeAtom {
    fn name(&self) -> String {
        format!("opposite({})", self.atom)
    }

    fn propose_pair(&mut self, _oracle: &Oracle, left: &Transcript, right: &Transcript) -> (Vec<Bound>, Vec<Bound>) {
        let l = Bound::new(self.atom.clone(), self.threshold);
        let r = Bound::new(self.atom.clone().neg(), self.threshold);
        let l = if left.last().contains(&l) { vec![] } else { vec![l] };
        let r = if right.last().contains(&r) { vec![] } else { vec![r] };
        (l, r)
    }
}

/// First witness index used to relabel the constants of lifted pair instances.
pub const LIFT_BASE: u32 = 32;

/// Witness constants standing in for `c0`, `c1` in instance `idx`.
pub fn lift_constants(idx: usize) -> (u32, u32) {
    let base = LIFT_BASE + 2 * idx as u32;
    (base, base + 1)
}

/// One pair instance, owning its state and its relabelling.
struct Instance {
    level: usize,
    node: usize,
    strategy: Box<dyn PairStrategy>,
    pi: BTreeMap<u32, u32>,
    inverse: BTreeMap<u32, u32>,
}

/// Tree strategy running one instance of a pair strategy per split node.
///
/// The instance of the node split at level `j` plays every pair of descendants that differ
/// only in the level-`j` bit, on constants relabelled by swapping `c0, c1` with
/// [`lift_constants`] of its index. Additions are unioned per node and certified together,
/// falling back to instance-by-instance certification.
pub struct LiftedPairwise {
    depth: usize,
    instances: Vec<Instance>,
}

/// Lifts a pair strategy to the depth-`depth` splitting game.
pub fn lift_pairwise(depth: usize, mut factory: impl FnMut(usize) -> Box<dyn PairStrategy>) -> LiftedPairwise {
    let mut instances = Vec::new();
    for level in 1..=depth {
        for node in 0..(1usize << (level - 1)) {
            let idx = instances.len();
            let (a, b) = lift_constants(idx);
            let pi: BTreeMap<u32, u32> = [(0, a), (a, 0), (1, b), (b, 1)].into_iter().collect();
            let inverse = pi.iter().map(|(&x, &y)| (y, x)).collect();
            instances.push(Instance { level, node, strategy: factory(idx), pi, inverse });
        }
    }
    LiftedPairwise { depth, instances }
}

impl LiftedPairwise {
    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    /// `(split level, split node)` of every instance, in index order.
    pub fn instance_sites(&self) -> Vec<(usize, usize)> {
        self.instances.iter().map(|i| (i.level, i.node)).collect()
    }
}

impl TreeStrategy for LiftedPairwise {
    fn respond(&mut self, oracle: &Oracle, level: usize, nodes: &[Transcript]) -> Vec<Condition> {
        let mut adds: Vec<Vec<Vec<Bound>>> = vec![Vec::new(); nodes.len()];
        for inst in self.instances.iter_mut().filter(|i| i.level <= level && level <= self.depth) {
            let shift = level - inst.level;
            for (b, t) in nodes.iter().enumerate() {
                // Left descendants of the instance's split node.
                if b >> (shift + 1) != inst.node || (b >> shift) & 1 != 0 {
                    continue;
                }
                let m = b | (1 << shift);
                let (l, r) = inst.strategy.propose_pair(
                    oracle,
                    &t.rename_witnesses(&inst.inverse),
                    &nodes[m].rename_witnesses(&inst.inverse),
                );
                let relabel = |bs: Vec<Bound>| bs.into_iter().map(|x| x.rename_witnesses(&|c| *inst.pi.get(&c).unwrap_or(&c))).collect::<Vec<_>>();
                adds[b].push(relabel(l));
                adds[m].push(relabel(r));
            }
        }
        nodes
            .iter()
            .zip(adds)
            .map(|(t, groups)| {
                let last = t.last();
                let all: Vec<Bound> = groups.iter().flatten().cloned().collect();
                if all.is_empty() {
                    return last.clone();
                }
                if let Ok(Some(q)) = oracle.certify(last, &all) {
                    return q;
                }
                let mut q = last.clone();
                for g in groups.into_iter().filter(|g| !g.is_empty()) {
                    if let Ok(Some(next)) = oracle.certify(&q, &g) {
                        q = next;
                    }
                }
                q
            })
            .collect()
    }
}

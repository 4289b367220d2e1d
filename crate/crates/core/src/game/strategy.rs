use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::transcript::Transcript;
use crate::forcing::bound_interval;
use crate::logic::formula::Formula;
use crate::oracle::{move_pool, move_pool_focused, Bound, Condition, Oracle, PoolBudget};

/// A deterministic move function for one side of one board.
pub trait Strategy: Send {
    fn name(&self) -> String;
    /// The next condition; it should extend `t.last()`, otherwise the side forfeits.
    fn propose(&mut self, oracle: &Oracle, t: &Transcript) -> Condition;
    fn ledger(&self) -> Vec<LedgerEntry> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "state", content = "detail", rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Done(String),
    Flagged(String),
}

impl TaskStatus {
    pub fn is_pending(&self) -> bool {
        matches!(self, TaskStatus::Pending)
    }

    pub fn is_done(&self) -> bool {
        matches!(self, TaskStatus::Done(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LedgerEntry {
    pub task: String,
    pub status: TaskStatus,
    pub activations: u64,
}

/// A schedulable unit of enforcement work.
pub trait Task: Send {
    fn name(&self) -> String;
    fn status(&self) -> TaskStatus;
    /// One bounded step from the working condition `q`; returns `q` itself when nothing is played.
    fn step(&mut self, oracle: &Oracle, q: &Condition) -> Condition;
    /// Re-checks a done task's postcondition against a final condition.
    fn verify(&self, _last: &Condition) -> bool {
        true
    }
}

/// Services pending tasks round-robin, `fuel` activations per turn.
pub struct TaskStrategy {
    name: String,
    tasks: Vec<Box<dyn Task>>,
    activations: Vec<u64>,
    cursor: usize,
    fuel: usize,
}

impl TaskStrategy {
    pub fn new(name: &str, tasks: Vec<Box<dyn Task>>, fuel: usize) -> TaskStrategy {
        let n = tasks.len();
        TaskStrategy { name: name.to_string(), tasks, activations: vec![0; n], cursor: 0, fuel: fuel.max(1) }
    }

    pub fn tasks(&self) -> &[Box<dyn Task>] {
        &self.tasks
    }

    pub fn activations(&self) -> &[u64] {
        &self.activations
    }

    pub fn all_done(&self) -> bool {
        self.tasks.iter().all(|t| t.status().is_done())
    }

    /// Done tasks whose postcondition fails against `last`.
    pub fn unverified(&self, last: &Condition) -> Vec<String> {
        self.tasks.iter().filter(|t| t.status().is_done() && !t.verify(last)).map(|t| t.name()).collect()
    }

    /// Runs one turn from `q`.
    pub fn advance(&mut self, oracle: &Oracle, mut q: Condition) -> Condition {
        let n = self.tasks.len();
        let mut serviced = 0;
        let mut scanned = 0;
        while serviced < self.fuel && scanned < n {
            let i = self.cursor;
            self.cursor = (self.cursor + 1) % n;
            scanned += 1;
            if self.tasks[i].status().is_pending() {
                self.activations[i] += 1;
                q = self.tasks[i].step(oracle, &q);
                serviced += 1;
            }
        }
        q
    }
}

impl Strategy for TaskStrategy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn propose(&mut self, oracle: &Oracle, t: &Transcript) -> Condition {
        self.advance(oracle, t.last().clone())
    }

    fn ledger(&self) -> Vec<LedgerEntry> {
        self.tasks
            .iter()
            .zip(&self.activations)
            .map(|(t, &a)| LedgerEntry { task: t.name(), status: t.status(), activations: a })
            .collect()
    }
}

/// Dovetails the tasks of all components into one fair round-robin schedule.
///
/// Tasks are interleaved component by component so each component is visited once per
/// cycle of its task index.
pub fn conjoin(components: Vec<TaskStrategy>, fuel: usize) -> TaskStrategy {
    let name = components.iter().map(|c| c.name.clone()).collect::<Vec<_>>().join("+");
    let mut queues: Vec<std::collections::VecDeque<Box<dyn Task>>> =
        components.into_iter().map(|c| c.tasks.into_iter().collect()).collect();
    let mut tasks = Vec::new();
    while queues.iter().any(|q| !q.is_empty()) {
        for q in queues.iter_mut() {
            if let Some(t) = q.pop_front() {
                tasks.push(t);
            }
        }
    }
    TaskStrategy::new(&name, tasks, fuel)
}

/// Plays `last` again.
#[derive(Clone, Debug, Default)]
pub struct Stall;

impl Strategy for Stall {
    fn name(&self) -> String {
        "stall".into()
    }

    fn propose(&mut self, _oracle: &Oracle, t: &Transcript) -> Condition {
        t.last().clone()
    }
}

/// Uniform choice from the move pool, seeded.
pub struct RandomLegal {
    rng: ChaCha8Rng,
    budget: PoolBudget,
}

impl RandomLegal {
    pub fn new(seed: u64, budget: PoolBudget) -> RandomLegal {
        RandomLegal { rng: ChaCha8Rng::seed_from_u64(seed), budget }
    }
}

impl Strategy for RandomLegal {
    fn name(&self) -> String {
        "random-legal".into()
    }

    fn propose(&mut self, oracle: &Oracle, t: &Transcript) -> Condition {
        match move_pool(oracle, t.last(), &self.budget) {
            Ok(pool) => pool.members.choose(&mut self.rng).cloned().unwrap_or_else(|| t.last().clone()),
            Err(_) => t.last().clone(),
        }
    }
}

/// Prefers extensions keeping the tracked sentences' bound intervals widest; ties go to the
/// extension adding the most bounds, then to pool order.
pub struct Mischief {
    tracked: Vec<Formula>,
    budget: PoolBudget,
}

impl Mischief {
    pub fn new(tracked: Vec<Formula>, budget: PoolBudget) -> Mischief {
        Mischief { tracked, budget }
    }

    fn width(&self, q: &Condition) -> u128 {
        // Summed in units of 2^-60 to stay exact.
        self.tracked
            .iter()
            .map(|a| {
                let w = bound_interval(q, a).width();
                u128::from(w.numerator()) << (60 - w.exponent())
            })
            .sum()
    }
}

impl Strategy for Mischief {
    fn name(&self) -> String {
        "mischief".into()
    }

    fn propose(&mut self, oracle: &Oracle, t: &Transcript) -> Condition {
        let Ok(pool) = move_pool_focused(oracle, t.last(), &self.budget, &[]) else { return t.last().clone() };
        let mut best: Option<(&Condition, u128, usize)> = None;
        for q in &pool.members {
            let (w, n) = (self.width(q), q.len());
            let better = match best {
                None => true,
                Some((_, bw, bn)) => w > bw || (w == bw && n > bn),
            };
            if better {
                best = Some((q, w, n));
            }
        }
        best.map_or_else(|| t.last().clone(), |(q, _, _)| q.clone())
    }
}

/// A strategy acting on the image of its board under a witness permutation.
pub struct Transported<S> {
    pub inner: S,
    forward: BTreeMap<u32, u32>,
    backward: BTreeMap<u32, u32>,
    /// Pulled-back copy of the board so far; only new moves are renamed on each turn.
    pulled: Option<Transcript>,
    /// Renamed copies of bounds seen so far, shared across the pulled moves.
    renamed: HashMap<Bound, Bound>,
}

/// Transports a strategy along the finitely supported permutation `pi`.
pub fn transport<S: Strategy>(pi: BTreeMap<u32, u32>, s: S) -> Transported<S> {
    let backward = pi.iter().map(|(&a, &b)| (b, a)).collect();
    Transported { inner: s, forward: pi, backward, pulled: None, renamed: HashMap::new() }
}

/// `pi(p)`.
pub fn transport_condition(pi: &BTreeMap<u32, u32>, p: &Condition) -> Condition {
    p.rename_witnesses(pi)
}

impl<S: Strategy> Strategy for Transported<S> {
    fn name(&self) -> String {
        format!("transport({})", self.inner.name())
    }

    fn propose(&mut self, oracle: &Oracle, t: &Transcript) -> Condition {
        let stale = self.pulled.as_ref().is_none_or(|p| {
            p.board != t.board || p.moves.len() > t.moves.len() || p.origin != t.origin.rename_witnesses(&self.backward)
        });
        if stale {
            self.pulled = Some(Transcript::new(t.board, t.origin.rename_witnesses(&self.backward)));
        }
        let pulled = self.pulled.as_mut().expect("set above");
        for m in &t.moves[pulled.moves.len()..] {
            let back = &self.backward;
            let f = |c: u32| *back.get(&c).unwrap_or(&c);
            let bounds = m
                .condition
                .bounds
                .iter()
                .map(|b| self.renamed.entry(b.clone()).or_insert_with(|| b.rename_witnesses(&f)).clone())
                .collect();
            let cert = Condition { bounds: Default::default(), cert: m.condition.cert.clone() }.rename_witnesses(back).cert;
            pulled.moves.push(super::transcript::Move { side: m.side, condition: Condition { bounds, cert }, flag: m.flag.clone() });
        }
        pulled.forfeit = t.forfeit.clone();
        self.inner.propose(oracle, pulled).rename_witnesses(&self.forward)
    }

    fn ledger(&self) -> Vec<LedgerEntry> {
        self.inner.ledger()
    }
}

impl Strategy for Box<dyn Strategy> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn propose(&mut self, oracle: &Oracle, t: &Transcript) -> Condition {
        (**self).propose(oracle, t)
    }

    fn ledger(&self) -> Vec<LedgerEntry> {
        (**self).ledger()
    }
}

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::dyadic::Dyadic;
use crate::etypes::{etype_of_compiled, ETypeApprox};
use crate::game::CompiledApprox;
use crate::logic::signature::Signature;

/// Cap on candidate extensions tried over the whole search.
const NODE_LIMIT: u64 = 1_000_000;

/// Depth of the existential types compared at each step.
const TYPE_DEPTH: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forth,
    Back,
}

/// Constant pairs `(a-side, b-side)` in the order they were matched.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartialMap {
    pub pairs: Vec<(u32, u32)>,
}

impl PartialMap {
    fn left(&self) -> Vec<u32> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    fn right(&self) -> Vec<u32> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn extends(&self, other: &PartialMap) -> bool {
        self.pairs.starts_with(&other.pairs)
    }
}

/// Each map extends the previous one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BackForthChain {
    pub maps: Vec<PartialMap>,
}

impl BackForthChain {
    pub fn last(&self) -> &PartialMap {
        self.maps.last().expect("chains start with the empty map")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackForthFailure {
    /// 1-based step of the deepest unmatched constant.
    pub step: usize,
    pub side: Direction,
    pub tuple_a: Vec<u32>,
    pub tuple_b: Vec<u32>,
    pub etype_a: ETypeApprox,
    /// Type of the lowest candidate's tuple, when there was a candidate.
    pub etype_b: Option<ETypeApprox>,
    pub exhausted: bool,
}

struct Side<'a> {
    c: &'a CompiledApprox,
    memo: HashMap<Vec<u32>, ETypeApprox>,
}

impl Side<'_> {
    fn etype(&mut self, sig: &Signature, t: &[u32]) -> ETypeApprox {
        if let Some(e) = self.memo.get(t) {
            return e.clone();
        }
        let e = etype_of_compiled(self.c, sig, t, TYPE_DEPTH).expect("compiled constants are interpreted");
        self.memo.insert(t.to_vec(), e.clone());
        e
    }

    /// Lowest constant naming each element.
    fn candidates(&self) -> Vec<u32> {
        let mut reps: BTreeMap<usize, u32> = BTreeMap::new();
        for &k in &self.c.constants {
            if let Some(e) = self.c.element(k) {
                reps.entry(e).and_modify(|m| *m = (*m).min(k)).or_insert(k);
            }
        }
        let mut out: Vec<u32> = reps.into_values().collect();
        out.sort();
        out
    }
}

struct Search<'a, 'b> {
    sig: &'a Signature,
    eps: Dyadic,
    a: Side<'b>,
    b: Side<'b>,
    targets: Vec<(Direction, u32)>,
    nodes: u64,
    deepest: Option<BackForthFailure>,
}

impl Search<'_, '_> {
    fn go(&mut self, step: usize, map: &mut PartialMap, chain: &mut Vec<PartialMap>) -> bool {
        if step == self.targets.len() {
            return true;
        }
        let (dir, target) = self.targets[step];
        let already = match dir {
            Direction::Forth => map.pairs.iter().any(|p| p.0 == target),
            Direction::Back => map.pairs.iter().any(|p| p.1 == target),
        };
        if already {
            chain.push(map.clone());
            if self.go(step + 1, map, chain) {
                return true;
            }
            chain.pop();
            return false;
        }
        let cands = match dir {
            Direction::Forth => self.b.candidates(),
            Direction::Back => self.a.candidates(),
        };
        let mut first_type = None;
        for cand in cands {
            self.nodes += 1;
            if self.nodes > NODE_LIMIT {
                break;
            }
            let pair = match dir {
                Direction::Forth => (target, cand),
                Direction::Back => (cand, target),
            };
            map.pairs.push(pair);
            let (ta, tb) = (map.left(), map.right());
            let (ea, eb) = (self.a.etype(self.sig, &ta), self.b.etype(self.sig, &tb));
            if first_type.is_none() {
                first_type = Some((ta.clone(), tb.clone(), ea.clone(), eb.clone()));
            }
            if ea.sup_gap(&eb) <= self.eps {
                chain.push(map.clone());
                if self.go(step + 1, map, chain) {
                    return true;
                }
                chain.pop();
            }
            map.pairs.pop();
        }
        let deeper = self.deepest.as_ref().is_none_or(|d| step + 1 > d.step);
        if deeper {
            let (tuple_a, tuple_b, etype_a, etype_b) = match first_type {
                Some((ta, tb, ea, eb)) => (ta, tb, ea, Some(eb)),
                None => {
                    let mut ta = map.left();
                    let tb = map.right();
                    if dir == Direction::Forth {
                        ta.push(target);
                    }
                    let ea = self.a.etype(self.sig, &ta);
                    (ta, tb, ea, None)
                }
            };
            self.deepest = Some(BackForthFailure {
                step: step + 1,
                side: dir,
                tuple_a,
                tuple_b,
                etype_a,
                etype_b,
                exhausted: self.nodes <= NODE_LIMIT,
            });
        }
        false
    }
}

/// Alternating forth/back matching of the first `depth` constants of each side, preserving
/// bounded existential types within `eps`. Candidates are tried lowest constant first.
pub fn backforth_compare(
    a: &CompiledApprox,
    b: &CompiledApprox,
    sig: &Signature,
    depth: usize,
    eps: Dyadic,
) -> Result<BackForthChain, Box<BackForthFailure>> {
    let firsts = |c: &CompiledApprox| c.constants.iter().copied().take(depth).collect::<Vec<_>>();
    let (fa, fb) = (firsts(a), firsts(b));
    let mut targets = Vec::new();
    for i in 0..fa.len().max(fb.len()) {
        if let Some(&c) = fa.get(i) {
            targets.push((Direction::Forth, c));
        }
        if let Some(&c) = fb.get(i) {
            targets.push((Direction::Back, c));
        }
    }
    let mut s = Search {
        sig,
        eps,
        a: Side { c: a, memo: HashMap::new() },
        b: Side { c: b, memo: HashMap::new() },
        targets,
        nodes: 0,
        deepest: None,
    };
    let mut map = PartialMap::default();
    let mut chain = vec![PartialMap::default()];
    if s.go(0, &mut map, &mut chain) {
        Ok(BackForthChain { maps: chain })
    } else {
        Err(Box::new(s.deepest.expect("a failed search records its deepest step")))
    }
}

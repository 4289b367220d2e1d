use std::collections::BTreeMap;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Outcome;
use crate::dyadic::Dyadic;
use crate::logic::enumerate::formulas;
use crate::oracle::{bounds_hold, check_condition, verify_witness, Bound, SearchBounds, Theory, Verdict};
use crate::structures::{all_structures, FiniteStructure};

pub const CALLS: usize = 1000;

/// One fuzzed oracle call and its verdict.
pub struct FuzzCase {
    pub theory: Theory,
    pub bounds: Vec<Bound>,
    pub search: SearchBounds,
    pub verdict: Verdict,
}

impl FuzzCase {
    pub fn constants(&self) -> usize {
        self.bounds.iter().flat_map(|b| b.formula.witnesses()).unique().count()
    }

    pub fn describe(&self) -> String {
        format!("[{}] {{{}}}", self.theory.name, self.bounds.iter().map(|b| b.to_string()).join(", "))
    }
}

/// `count` seeded calls alternating between the metric and graph packs.
///
/// Each call draws one to four bounds on quantifier-free formulas of depth `<= 1` over one to
/// three constants, with thresholds on the 1/16 grid, and searches universes of at most as
/// many elements as there are constants.
pub fn fuzz_cases(seed: u64, count: usize) -> Vec<FuzzCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let packs: Vec<(Theory, Vec<Vec<crate::logic::Formula>>)> = [Theory::metric(), Theory::graphs()]
        .into_iter()
        .map(|t| {
            let fs = (1..=3u32).map(|n| formulas(&t.signature, &(0..n).collect::<Vec<_>>(), 1, 0)).collect();
            (t, fs)
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (theory, fs) = &packs[out.len() % 2];
        let n = rng.gen_range(1..=3usize);
        if fs[n - 1].is_empty() {
            continue;
        }
        let k = rng.gen_range(1..=4usize);
        let bounds: Vec<Bound> = (0..k)
            .map(|_| {
                let f = fs[n - 1].choose(&mut rng).expect("nonempty").clone();
                Bound::new(f, Dyadic::new(rng.gen_range(1..=16), 4))
            })
            .collect();
        let mut search = SearchBounds::for_theory(theory);
        let used = bounds.iter().flat_map(|b| b.formula.witnesses()).unique().count();
        search.max_universe = used.max(1);
        let verdict = match check_condition(theory, &bounds, &search) {
            Ok(v) => v,
            Err(e) => Verdict::Unknown(e.to_string()),
        };
        out.push(FuzzCase { theory: theory.clone(), bounds, search, verdict });
    }
    out
}

/// Models of the theory on at most `n` points with every assignment of the mentioned constants.
fn brute_force_sat(case: &FuzzCase) -> bool {
    let consts: Vec<u32> = case.bounds.iter().flat_map(|b| b.formula.witnesses()).unique().sorted().collect();
    for size in 1..=case.search.max_universe {
        let (models, _) = all_structures(&case.theory.signature, size, case.search.grid_exp, usize::MAX);
        for m in models.iter().filter(|m| case.theory.is_model(m)) {
            for assign in (0..consts.len()).map(|_| 0..size).multi_cartesian_product() {
                let s = FiniteStructure {
                    constants: consts.iter().copied().zip(assign).collect::<BTreeMap<_, _>>(),
                    ..m.clone()
                };
                if bounds_hold(&case.bounds, &case.search, &s) {
                    return true;
                }
            }
        }
    }
    false
}

/// Every `Sat` witness re-verifies; every classical `UnsatAtBound` survives brute force.
pub fn soundness(seed: u64) -> Outcome {
    let cases = fuzz_cases(seed, CALLS);
    let mut problems = Vec::new();
    let mut tally: BTreeMap<&'static str, usize> = BTreeMap::new();
    for c in &cases {
        *tally.entry(c.verdict.kind()).or_default() += 1;
        match &c.verdict {
            Verdict::Sat(w) if !verify_witness(&c.theory, &c.bounds, &c.search, w) => {
                problems.push(format!("{}: witness fails re-validation", c.describe()));
            }
            Verdict::UnsatAtBound(_) if c.theory.classical() && brute_force_sat(c) => {
                problems.push(format!("{}: unsat at bound but a model exists", c.describe()));
            }
            _ => {}
        }
    }
    let detail = tally.iter().map(|(k, v)| format!("{k} {v}")).join(", ");
    Outcome::check(problems.is_empty(), format!("{} calls: {detail}", cases.len()), &problems)
}

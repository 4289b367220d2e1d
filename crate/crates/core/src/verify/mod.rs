//! Acceptance suites as library functions, shared by the test suite and `forcegame verify`.

use std::time::Instant;

use serde::Serialize;

pub mod enforcement;
pub mod forcing;
pub mod games;
pub mod oracle;

/// Result of one suite run.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
    pub problems: Vec<String>,
}

impl Outcome {
    pub fn check(passed: bool, detail: String, problems: &[String]) -> Outcome {
        Outcome { passed, detail, problems: problems.iter().take(10).cloned().collect() }
    }
}

/// Named suite report with timing.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub detail: String,
    pub problems: Vec<String>,
    #[serde(skip)]
    pub seconds: f64,
}

pub fn timed(suite: &str, seed: u64, f: impl FnOnce(u64) -> Outcome) -> SuiteReport {
    let start = Instant::now();
    let o = f(seed);
    SuiteReport {
        suite: suite.to_string(),
        seed,
        passed: o.passed,
        detail: o.detail,
        problems: o.problems,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub type Suite = fn(u64) -> Outcome;

/// Every acceptance suite by name, in reporting order.
pub const SUITES: [(&str, Suite); 11] = [
    ("coincidence", forcing::coincidence),
    ("monotonicity", forcing::monotonicity),
    ("homogeneity", forcing::homogeneity),
    ("narrowing", forcing::narrowing),
    ("random-graph", enforcement::random_graph),
    ("metric", enforcement::metric),
    ("generic-model", forcing::generic_model),
    ("conjunction", games::conjunction),
    ("splitting", games::splitting),
    ("backforth", games::backforth),
    ("oracle-fuzz", oracle::soundness),
];

pub fn suite(name: &str) -> Option<Suite> {
    SUITES.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

//! Command implementations. Every command returns its report document as pretty JSON so that
//! the CLI and the service print identical bytes for identical inputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use forcegame::dyadic::Dyadic;
use forcegame::enforcers::{ledger_report, EnforcerConfig};
use forcegame::forcing::{check_sentence, forcing_value, narrow, ForcingBudget, Kind};
use forcegame::game::{audit, play, replay_json, Mischief, RandomLegal, Stall, Strategy};
use forcegame::logic::{classify, eval_sentence, parse_formula, Formula};
use forcegame::oracle::condition::parse_wire_json;
use forcegame::oracle::{Bound, Condition, Oracle, Policy, PoolBudget, SearchBounds, Theory, Verdict};
use forcegame::session::default_analysis_budget;
use forcegame::structures::{FiniteStructure, StructureFile};
use forcegame::verify::{timed, SuiteReport, SUITES};

/// A failed command: usage problems exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// A report and whether the command counts as passed.
pub struct Report {
    pub body: String,
    pub passed: bool,
}

impl Report {
    fn pass(v: &impl Serialize) -> Report {
        Report { body: to_json(v), passed: true }
    }

    fn with(v: &impl Serialize, passed: bool) -> Report {
        Report { body: to_json(v), passed }
    }
}

pub fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialise")
}

/// Options shared by every command touching a theory.
#[derive(Args, Clone, Debug)]
pub struct TheoryArgs {
    /// Theory pack file, or one of the built-in packs `metric` and `graphs`.
    #[arg(long, default_value = "graphs")]
    pub theory: String,
    /// Search bounds `N,g`: at most N elements, tables on the grid 2^-g.
    #[arg(long, value_parser = parse_search)]
    pub bounds: Option<(usize, u32)>,
    #[arg(long, default_value = "strict")]
    pub policy: Policy,
}

fn parse_search(s: &str) -> Result<(usize, u32), String> {
    let (n, g) = s.split_once(',').ok_or("expected N,g")?;
    Ok((n.trim().parse().map_err(|e| format!("N: {e}"))?, g.trim().parse().map_err(|e| format!("g: {e}"))?))
}

impl TheoryArgs {
    pub fn theory(&self) -> Result<Theory, CliError> {
        if let Some(t) = Theory::builtin(&self.theory) {
            return Ok(t);
        }
        let text = read(Path::new(&self.theory))?;
        Theory::from_json(&text).map_err(usage)
    }

    pub fn oracle(&self) -> Result<Oracle, CliError> {
        let theory = self.theory()?;
        let mut search = SearchBounds::for_theory(&theory);
        if let Some((n, g)) = self.bounds {
            search.max_universe = n;
            search.grid_exp = g;
        }
        Ok(Oracle::new(theory, search, self.policy))
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// A condition given as a wire file and/or `--bound "formula < r"` items.
#[derive(Args, Clone, Debug, Default)]
pub struct ConditionArgs {
    /// JSON list of `{formula, bound}` items.
    #[arg(long)]
    pub condition: Option<PathBuf>,
    /// One bound `formula < r`; repeatable.
    #[arg(long = "bound")]
    pub bound: Vec<String>,
}

impl ConditionArgs {
    pub fn bounds(&self, oracle: &Oracle) -> Result<Vec<Bound>, CliError> {
        let sig = &oracle.theory.signature;
        let mut out = match &self.condition {
            Some(p) => parse_wire_json(&read(p)?, sig).map_err(usage)?,
            None => Vec::new(),
        };
        for item in &self.bound {
            let (f, r) = item.rsplit_once('<').ok_or_else(|| usage(format!("`{item}`: expected `formula < r`")))?;
            let b = Bound::new(parse_formula(f.trim(), sig).map_err(usage)?, r.trim().parse::<Dyadic>().map_err(usage)?);
            b.validate().map_err(usage)?;
            out.push(b);
        }
        Ok(out)
    }

    /// The certified condition, failing when the oracle finds no witness.
    pub fn certified(&self, oracle: &Oracle) -> Result<Condition, CliError> {
        let bounds = self.bounds(oracle)?;
        if bounds.is_empty() {
            return Ok(oracle.root());
        }
        oracle
            .certify_bounds(&bounds)
            .map_err(usage)?
            .ok_or_else(|| CliError::Failure("the condition is not certified within the search bounds".into()))
    }
}

/// Pool options of `force`; all absent means the default analysis budget.
#[derive(Args, Clone, Debug, Default)]
pub struct BudgetArgs {
    /// Candidate atoms in the move pool.
    #[arg(long)]
    pub atoms: Option<usize>,
    /// Comma-separated thresholds for pool bounds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<Dyadic>,
    /// Bounds added per pool member.
    #[arg(long)]
    pub additions: Option<usize>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub fresh: u32,
    /// Draw atoms from every distinct atom over the window, not only the sentence's.
    #[arg(long)]
    pub unfocused: bool,
    #[arg(long)]
    pub depth: Option<usize>,
}

impl BudgetArgs {
    fn budget(&self, phi: &Formula) -> ForcingBudget {
        let base = default_analysis_budget(phi);
        let mut pool = PoolBudget::new(
            self.atoms.unwrap_or(base.pool.max_atoms),
            if self.thresholds.is_empty() { base.pool.thresholds.clone() } else { self.thresholds.clone() },
            self.additions.unwrap_or(base.pool.max_additions),
            self.cap.unwrap_or(base.pool.cap),
        )
        .with_fresh(self.fresh);
        pool.focus_only = !self.unfocused;
        ForcingBudget::new(pool, self.depth.unwrap_or(base.depth))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Adversary {
    RandomLegal,
    Mischief,
    Stall,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a formula and print its canonical form and classification.
    Parse {
        #[arg(long)]
        formula: String,
        #[command(flatten)]
        theory: TheoryArgs,
    },
    /// Evaluate a sentence in a structure file.
    Eval {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        formula: String,
        #[command(flatten)]
        theory: TheoryArgs,
    },
    /// Search for a witness of a condition.
    Sat {
        #[command(flatten)]
        theory: TheoryArgs,
        #[command(flatten)]
        condition: ConditionArgs,
    },
    /// Strong, weak or game forcing value of a sentence at a condition.
    Force {
        #[arg(long, default_value = "weak")]
        kind: Kind,
        #[arg(long)]
        formula: String,
        #[command(flatten)]
        theory: TheoryArgs,
        #[command(flatten)]
        condition: ConditionArgs,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Extend a condition until a sentence is pinned to width below `eps`.
    Narrow {
        #[arg(long)]
        formula: String,
        #[arg(long, default_value = "1/8")]
        eps: Dyadic,
        #[command(flatten)]
        theory: TheoryArgs,
        #[command(flatten)]
        condition: ConditionArgs,
    },
    /// Play a machine-against-machine game, or replay a transcript file.
    Play {
        #[command(flatten)]
        theory: TheoryArgs,
        #[arg(long, default_value_t = 20)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enforcer configuration file for `∃`; the default is extra-canonical + universal + ec.
        #[arg(long)]
        exists: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random-legal")]
        forall: Adversary,
        /// Re-certify and audit a transcript file instead of playing.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Also write the transcript file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an acceptance suite (or `all`); fails when any suite fails.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Serve the session API on a loopback address.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: std::net::SocketAddr,
        /// Write each session's transcript file here after every change.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
}

fn formula(oracle: &Oracle, text: &str) -> Result<Formula, CliError> {
    parse_formula(text, &oracle.theory.signature).map_err(usage)
}

pub fn cmd_parse(text: &str, theory: &TheoryArgs) -> Result<Report, CliError> {
    let oracle = theory.oracle()?;
    let f = formula(&oracle, text)?;
    Ok(Report::pass(&json!({
        "formula": f.to_string(),
        "depth": f.depth(),
        "quantifier_depth": f.quantifier_depth(),
        "sentence": f.is_sentence(),
        "classification": classify(&f),
    })))
}

pub fn cmd_eval(structure: &Path, text: &str, theory: &TheoryArgs) -> Result<Report, CliError> {
    let oracle = theory.oracle()?;
    let f = formula(&oracle, text)?;
    let s = FiniteStructure::from_json(&read(structure)?).map_err(usage)?;
    s.validate(&oracle.theory.signature).map_err(|v| usage(format!("{v:?}")))?;
    let v = eval_sentence(&f, &s).map_err(usage)?;
    Ok(Report::pass(&json!({ "formula": f.to_string(), "value": v })))
}

pub fn cmd_sat(theory: &TheoryArgs, condition: &ConditionArgs) -> Result<Report, CliError> {
    let oracle = theory.oracle()?;
    let bounds = condition.bounds(&oracle)?;
    let verdict = oracle.check(&bounds).map_err(usage)?;
    let doc = json!({
        "verdict": verdict.kind(),
        "bounds": forcegame::oracle::condition::to_wire(&bounds),
        "search": oracle.search,
        "witness": verdict.witness().map(StructureFile::from),
        "reason": match &verdict { Verdict::Unknown(r) => Some(r.clone()), _ => None },
    });
    Ok(Report::with(&doc, verdict.is_sat()))
}

pub fn cmd_force(kind: Kind, text: &str, theory: &TheoryArgs, condition: &ConditionArgs, budget: &BudgetArgs) -> Result<Report, CliError> {
    let oracle = theory.oracle()?;
    let f = formula(&oracle, text)?;
    check_sentence(&f).map_err(usage)?;
    let p = condition.certified(&oracle)?;
    let b = budget.budget(&f);
    let r = forcing_value(&oracle, &p, &f, &b, kind).map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(Report::pass(&r))
}

pub fn cmd_narrow(text: &str, eps: Dyadic, theory: &TheoryArgs, condition: &ConditionArgs) -> Result<Report, CliError> {
    let oracle = theory.oracle()?;
    let f = formula(&oracle, text)?;
    let p = condition.certified(&oracle)?;
    let (q, i) = narrow(&oracle, &p, &f, eps).map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(Report::pass(&json!({
        "formula": f.to_string(),
        "eps": eps,
        "interval": i,
        "added": forcegame::oracle::condition::to_wire(&q.added_over(&p)),
        "condition": q.to_wire(),
    })))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_play(
    theory: &TheoryArgs,
    rounds: usize,
    seed: u64,
    exists: Option<&Path>,
    forall: Adversary,
    replay: Option<&Path>,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let oracle = theory.oracle()?;
    if let Some(path) = replay {
        let t = replay_json(&oracle, &read(path)?).map_err(|e| CliError::Failure(e.to_string()))?;
        let audited = audit(&oracle, &t);
        let doc = json!({
            "replayed": t.len(),
            "audit": audited.as_ref().err().map(|e| e.to_string()),
            "transcript": t.to_file(&oracle.theory.name, oracle.policy),
        });
        return Ok(Report::with(&doc, audited.is_ok()));
    }
    let config = match exists {
        Some(p) => serde_json::from_str::<EnforcerConfig>(&read(p)?).map_err(usage)?,
        None => EnforcerConfig::canonical_ec(),
    };
    let mut e = config.build(&oracle.theory).map_err(usage)?;
    let pool = PoolBudget::new(4, vec![Dyadic::HALF], 1, 16).with_fresh(1);
    let mut a: Box<dyn Strategy> = match forall {
        Adversary::RandomLegal => Box::new(RandomLegal::new(seed, pool)),
        Adversary::Mischief => Box::new(Mischief::new(Vec::new(), pool)),
        Adversary::Stall => Box::new(Stall),
    };
    let t = play(&oracle, a.as_mut(), &mut e, rounds);
    let file = t.to_file(&oracle.theory.name, oracle.policy);
    if let Some(p) = out {
        fs::write(p, to_json(&file)).map_err(|err| CliError::Failure(format!("{}: {err}", p.display())))?;
    }
    let ledger = ledger_report(&e, t.last());
    let passed = t.forfeit.is_none() && ledger.unverified.is_empty();
    Ok(Report::with(&json!({ "forall": a.name(), "exists": e.name(), "ledger": ledger, "transcript": file }), passed))
}

pub fn cmd_verify(suite: &str, seed: u64) -> Result<Report, CliError> {
    let chosen: Vec<_> = if suite == "all" {
        SUITES.to_vec()
    } else {
        let f = forcegame::verify::suite(suite).ok_or_else(|| {
            let names: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
            usage(format!("unknown suite `{suite}` (expected all or one of {})", names.join(", ")))
        })?;
        vec![(SUITES.iter().find(|(n, _)| *n == suite).expect("found above").0, f)]
    };
    let reports: Vec<SuiteReport> = chosen.iter().map(|(n, f)| timed(n, seed, *f)).collect();
    let passed = reports.iter().all(|r| r.passed);
    Ok(Report::with(&reports, passed))
}

//! Interactive sessions: one board, a human side and a machine side driven by an enforcer
//! configuration. Every operation is transactional; a rejected request leaves the session as
//! it was.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::enforcers::{ledger_report, EnforcerConfig, EnforcerError, LedgerReport};
use crate::forcing::{check_sentence, forcing_value, ForcingBudget, ForcingError, ForcingReport, Kind};
use crate::game::{compile_loose, legal_move, CompiledReport, MoveRecord, Side, Strategy, TaskStrategy, Transcript, TranscriptFile};
use crate::logic::formula::Formula;
use crate::logic::parse::{parse_formula, ParseError};
use crate::oracle::condition::{parse_wire, ConditionError};
use crate::oracle::{Certificate, Condition, Oracle, Policy, PoolBudget, SearchBounds, Theory, TheoryError, TheoryPack, WireBound};

/// Oracle searches allowed to one machine reply.
pub const DEFAULT_MOVE_BUDGET: u64 = 20_000;
/// Width under which a compiled entry counts as definitive in state views.
pub const VIEW_TOLERANCE: u32 = 3;

/// A built-in pack name or an inline pack.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TheorySource {
    Named(String),
    Pack(TheoryPack),
}

impl TheorySource {
    pub fn load(&self) -> Result<Theory, SessionError> {
        match self {
            TheorySource::Named(n) => Theory::builtin(n).ok_or_else(|| SessionError::UnknownTheory(n.clone())),
            TheorySource::Pack(p) => Ok(Theory::from_pack(p.clone())?),
        }
    }
}

/// Search limits as accepted from clients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub max_universe: usize,
    pub grid_exp: u32,
}

/// Parameters of `POST /sessions`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub theory: TheorySource,
    /// The side the human plays.
    #[serde(default = "default_human")]
    pub human: Side,
    #[serde(default = "EnforcerConfig::canonical_ec")]
    pub machine: EnforcerConfig,
    #[serde(default)]
    pub search: Option<SearchSpec>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default = "default_budget")]
    pub move_budget: u64,
}

fn default_human() -> Side {
    Side::Forall
}

fn default_budget() -> u64 {
    DEFAULT_MOVE_BUDGET
}

impl SessionConfig {
    pub fn new(theory: &str) -> SessionConfig {
        SessionConfig {
            theory: TheorySource::Named(theory.to_string()),
            human: default_human(),
            machine: EnforcerConfig::canonical_ec(),
            search: None,
            policy: Policy::Strict,
            move_budget: DEFAULT_MOVE_BUDGET,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown theory pack `{0}` (expected metric, graphs or an inline pack)")]
    UnknownTheory(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Enforcer(#[from] EnforcerError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error("it is {0}'s turn")]
    NotYourTurn(Side),
    #[error("the game is over")]
    Over,
    #[error("a move gives exactly one of `condition` and `additions`")]
    MoveShape,
}

/// Body of `POST /sessions/{id}/moves`: the full next condition, or bounds to add to the last.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveRequest {
    #[serde(default)]
    pub condition: Option<Vec<WireBound>>,
    #[serde(default)]
    pub additions: Option<Vec<WireBound>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoveResponse {
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub human: Option<MoveRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub machine: Option<MoveRecord>,
    pub length: usize,
}

/// Body of `POST /sessions/{id}/analyze`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub formula: String,
    #[serde(default = "default_kind")]
    pub kind: Kind,
    #[serde(default)]
    pub budget: Option<ForcingBudget>,
}

fn default_kind() -> Kind {
    Kind::Weak
}

/// Analysis panel entry; `length` is the transcript length it was computed at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnalysisEntry {
    pub formula: String,
    pub length: usize,
    pub report: ForcingReport,
}

/// Read-only projection of a session.
#[derive(Clone, Debug, Serialize)]
pub struct SessionView {
    pub id: String,
    pub theory: String,
    pub human: Side,
    pub machine: String,
    pub turn: Side,
    pub round: usize,
    pub over: bool,
    pub transcript: TranscriptFile,
    pub ledger: LedgerReport,
    pub analyses: Vec<AnalysisEntry>,
    pub compiled: Option<CompiledReport>,
}

pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    pub oracle: Oracle,
    pub transcript: Transcript,
    machine: TaskStrategy,
    analyses: Vec<AnalysisEntry>,
    /// Reports keyed by (formula, kind, budget) at the current transcript length.
    cache: BTreeMap<(String, Kind, String), ForcingReport>,
}

/// Default analysis budget: the focused pool over the sentence's atoms at threshold 1/2.
pub fn default_analysis_budget(phi: &Formula) -> ForcingBudget {
    let atoms = phi.atoms().into_iter().collect::<BTreeSet<_>>().len().max(1);
    ForcingBudget::new(PoolBudget::new(atoms * 3, vec![Dyadic::HALF], 1, 64).focused(), phi.depth() + 1)
}

impl Session {
    /// Opens a session; when the human plays `∃` the machine makes the opening move.
    pub fn create(id: String, config: SessionConfig) -> Result<Session, SessionError> {
        let theory = config.theory.load()?;
        let mut search = SearchBounds::for_theory(&theory);
        if let Some(s) = config.search {
            search.max_universe = s.max_universe;
            search.grid_exp = s.grid_exp;
        }
        let machine = config.machine.build(&theory)?;
        let oracle = Oracle::new(theory, search, config.policy);
        let transcript = Transcript::new(0, oracle.root());
        let mut s = Session { id, config, oracle, transcript, machine, analyses: Vec::new(), cache: BTreeMap::new() };
        if s.config.human == Side::Exists {
            s.machine_move();
        }
        Ok(s)
    }

    pub fn human(&self) -> Side {
        self.config.human
    }

    /// Plays the machine's move, stalling with a flag when it overruns the budget.
    fn machine_move(&mut self) {
        let before = self.oracle.searches();
        let proposal = self.machine.propose(&self.oracle, &self.transcript);
        let spent = self.oracle.searches() - before;
        if spent > self.config.move_budget {
            // The tasks advanced past the board; restart them from the configuration.
            if let Ok(fresh) = self.config.machine.build(&self.oracle.theory) {
                self.machine = fresh;
            }
            let stall = self.transcript.last().clone();
            self.transcript.push(stall);
            let reason = format!("move budget exceeded ({spent} > {} searches); stalled", self.config.move_budget);
            self.transcript.moves.last_mut().expect("just pushed").flag = Some(reason);
            return;
        }
        match legal_move(&self.oracle, &self.transcript, &proposal) {
            Ok(q) => self.transcript.push(q),
            Err(r) => self.transcript.record_forfeit(self.human().other(), r.to_string()),
        }
    }

    fn proposal(&self, req: &MoveRequest) -> Result<Condition, SessionError> {
        let sig = &self.oracle.theory.signature;
        let bounds = match (&req.condition, &req.additions) {
            (Some(c), None) => parse_wire(c, sig)?,
            (None, Some(a)) => {
                let mut all: Vec<_> = self.transcript.last().bounds.iter().cloned().collect();
                all.extend(parse_wire(a, sig)?);
                all
            }
            _ => return Err(SessionError::MoveShape),
        };
        Ok(Condition { bounds: bounds.into_iter().collect(), cert: Certificate::Assumed("proposed".into()) })
    }

    /// The human's move followed by the machine's reply. Illegal moves are rejected without
    /// touching the session.
    pub fn play(&mut self, req: &MoveRequest) -> Result<MoveResponse, SessionError> {
        if self.transcript.is_over() {
            return Err(SessionError::Over);
        }
        if self.transcript.turn() != self.human() {
            return Err(SessionError::NotYourTurn(self.transcript.turn()));
        }
        let q = self.proposal(req)?;
        let q = match legal_move(&self.oracle, &self.transcript, &q) {
            Ok(q) => q,
            Err(r) => {
                return Ok(MoveResponse {
                    accepted: false,
                    rejection: Some(r.to_string()),
                    human: None,
                    machine: None,
                    length: self.transcript.len(),
                })
            }
        };
        self.transcript.push(q);
        self.cache.clear();
        let n = self.transcript.len();
        let human = self.record(n - 1);
        self.machine_move();
        let machine = (self.transcript.len() > n).then(|| self.record(n));
        Ok(MoveResponse { accepted: true, rejection: None, human: Some(human), machine, length: self.transcript.len() })
    }

    fn record(&self, i: usize) -> MoveRecord {
        let m = &self.transcript.moves[i];
        MoveRecord { side: m.side, condition: m.condition.to_wire(), flag: m.flag.clone() }
    }

    /// A forcing value at the last condition; appends to the analysis panel.
    pub fn analyze(&mut self, req: &AnalyzeRequest) -> Result<AnalysisEntry, SessionError> {
        let phi = parse_formula(&req.formula, &self.oracle.theory.signature)?;
        check_sentence(&phi)?;
        let budget = req.budget.clone().unwrap_or_else(|| default_analysis_budget(&phi));
        let key = (phi.to_string(), req.kind, serde_json::to_string(&budget).expect("budgets serialise"));
        let report = match self.cache.get(&key) {
            Some(r) => r.clone(),
            None => {
                let r = forcing_value(&self.oracle, self.transcript.last(), &phi, &budget, req.kind)?;
                self.cache.insert(key, r.clone());
                r
            }
        };
        let entry = AnalysisEntry { formula: phi.to_string(), length: self.transcript.len(), report };
        self.analyses.push(entry.clone());
        Ok(entry)
    }

    pub fn transcript_file(&self) -> TranscriptFile {
        self.transcript.to_file(&self.oracle.theory.name, self.oracle.policy)
    }

    pub fn view(&self) -> SessionView {
        let last = self.transcript.last();
        let tracked: Vec<Formula> = last
            .bounds
            .iter()
            .flat_map(|b| b.formula.atoms())
            .filter(|a| a.is_sentence())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let compiled = compile_loose(last, &tracked, Dyadic::pow2_inv(VIEW_TOLERANCE)).ok().map(|c| c.report());
        SessionView {
            id: self.id.clone(),
            theory: self.oracle.theory.name.clone(),
            human: self.human(),
            machine: self.machine.name(),
            turn: self.transcript.turn(),
            round: self.transcript.round(),
            over: self.transcript.is_over(),
            transcript: self.transcript_file(),
            ledger: ledger_report(&self.machine, last),
            analyses: self.analyses.clone(),
            compiled,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wire(f: &str, b: &str) -> WireBound {
        WireBound { formula: f.into(), bound: b.parse().unwrap() }
    }

    #[test]
    fn opening_move_gets_a_reply() {
        let mut s = Session::create("s1".into(), SessionConfig::new("metric")).unwrap();
        let r = s.play(&MoveRequest { additions: Some(vec![wire("d(c0,c1)", "1/2")]), condition: None }).unwrap();
        assert!(r.accepted);
        assert_eq!(r.length, 2);
        assert!(s.transcript.last().extends(&s.transcript.moves[0].condition));
    }

    #[test]
    fn non_extension_is_rejected_without_change() {
        let mut s = Session::create("s1".into(), SessionConfig::new("graphs")).unwrap();
        s.play(&MoveRequest { additions: Some(vec![wire("E(c0,c1)", "1/2")]), condition: None }).unwrap();
        let before = s.transcript.clone();
        let r = s.play(&MoveRequest { condition: Some(vec![]), additions: None }).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.rejection.as_deref(), Some("not an extension"));
        assert_eq!(s.transcript, before);
    }

    #[test]
    fn machine_opens_for_a_human_exists() {
        let mut c = SessionConfig::new("graphs");
        c.human = Side::Exists;
        let s = Session::create("s1".into(), c).unwrap();
        assert_eq!(s.transcript.len(), 1);
        assert_eq!(s.transcript.turn(), Side::Exists);
    }

    #[test]
    fn zero_budget_stalls_with_a_flag() {
        let mut c = SessionConfig::new("graphs");
        c.move_budget = 0;
        let mut s = Session::create("s1".into(), c).unwrap();
        let r = s.play(&MoveRequest { additions: Some(vec![wire("E(c0,c1)", "1/2")]), condition: None }).unwrap();
        let m = r.machine.unwrap();
        assert!(m.flag.unwrap().contains("budget"));
        assert_eq!(s.transcript.moves[1].condition.bounds, s.transcript.moves[0].condition.bounds);
    }
}

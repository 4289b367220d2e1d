use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::condition::{parse_wire, ConditionError};
use crate::oracle::{verify_witness, Certificate, Condition, Oracle, OracleError, Policy, WireBound};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Forall,
    Exists,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Forall => Side::Exists,
            Side::Exists => Side::Forall,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Forall => "forall",
            Side::Exists => "exists",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub side: Side,
    pub condition: Condition,
    /// Set when the move was accepted without a witness.
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forfeit {
    pub side: Side,
    /// 1-based round of the illegal move.
    pub round: usize,
    pub reason: String,
}

/// One board: the chain `p0 ⊆ p1 ⊆ ...` with alternating sides, `∀` first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub board: usize,
    /// Condition before the first move.
    pub origin: Condition,
    pub moves: Vec<Move>,
    pub forfeit: Option<Forfeit>,
}

/// Why a proposed move is not legal.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum Rejection {
    #[error("not an extension")]
    NotExtension,
    #[error("not a condition: {0}")]
    NotCondition(String),
}

impl Transcript {
    pub fn new(board: usize, origin: Condition) -> Transcript {
        Transcript { board, origin, moves: Vec::new(), forfeit: None }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn last(&self) -> &Condition {
        self.moves.last().map_or(&self.origin, |m| &m.condition)
    }

    pub fn turn(&self) -> Side {
        if self.moves.len().is_multiple_of(2) {
            Side::Forall
        } else {
            Side::Exists
        }
    }

    /// 1-based round of the next move.
    pub fn round(&self) -> usize {
        self.moves.len() / 2 + 1
    }

    pub fn is_over(&self) -> bool {
        self.forfeit.is_some()
    }

    /// Lowest `n` witness indices unused by `q` (which extends the last move).
    pub fn fresh(q: &Condition, n: u32) -> Vec<u32> {
        crate::oracle::pool::fresh_constants(&q.constants(), n)
    }

    /// Appends a move already checked by [`legal_move`].
    pub fn push(&mut self, condition: Condition) {
        let flag = match &condition.cert {
            Certificate::Assumed(r) => Some(r.clone()),
            Certificate::Witness(_) => None,
        };
        let side = self.turn();
        self.moves.push(Move { side, condition, flag });
    }

    pub fn record_forfeit(&mut self, side: Side, reason: String) {
        let round = self.round();
        self.forfeit = Some(Forfeit { side, round, reason });
    }

    pub fn rename_witnesses(&self, map: &BTreeMap<u32, u32>) -> Transcript {
        Transcript {
            board: self.board,
            origin: self.origin.rename_witnesses(map),
            moves: self
                .moves
                .iter()
                .map(|m| Move { side: m.side, condition: m.condition.rename_witnesses(map), flag: m.flag.clone() })
                .collect(),
            forfeit: self.forfeit.clone(),
        }
    }

    /// The file document: moves in the condition wire form plus metadata.
    pub fn to_file(&self, theory: &str, policy: Policy) -> TranscriptFile {
        TranscriptFile {
            board: self.board,
            theory: theory.to_string(),
            policy,
            origin: self.origin.to_wire(),
            moves: self
                .moves
                .iter()
                .map(|m| MoveRecord { side: m.side, condition: m.condition.to_wire(), flag: m.flag.clone() })
                .collect(),
            forfeit: self.forfeit.clone(),
        }
    }

    pub fn to_json(&self, theory: &str, policy: Policy) -> String {
        serde_json::to_string_pretty(&self.to_file(theory, policy)).expect("transcript serialises")
    }
}

/// Checks that `q` extends the last move and is certified under the oracle's policy.
///
/// Returns the condition with a verified certificate.
pub fn legal_move(oracle: &Oracle, t: &Transcript, q: &Condition) -> Result<Condition, Rejection> {
    if !q.extends(t.last()) {
        return Err(Rejection::NotExtension);
    }
    certify_member(oracle, q)
}

pub(crate) fn certify_member(oracle: &Oracle, q: &Condition) -> Result<Condition, Rejection> {
    if let Certificate::Witness(w) = &q.cert {
        if verify_witness(&oracle.theory, &q.canonical(), &oracle.search, w) {
            return Ok(q.clone());
        }
    }
    match oracle.certify_bounds(&q.canonical()) {
        Ok(Some(c)) => Ok(c),
        Ok(None) => Err(Rejection::NotCondition("no witness within the search bounds".into())),
        Err(e) => Err(Rejection::NotCondition(e.to_string())),
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("move {index}: expected {expected} to move")]
    Turn { index: usize, expected: Side },
    #[error("move {index}: not an extension of the previous condition")]
    Chain { index: usize },
    #[error("move {index}: certificate does not verify")]
    Certificate { index: usize },
}

/// Re-checks chain inclusion, turn alternation and every certificate.
pub fn audit(oracle: &Oracle, t: &Transcript) -> Result<(), AuditError> {
    let mut prev = &t.origin;
    let mut expected = Side::Forall;
    for (index, m) in t.moves.iter().enumerate() {
        if m.side != expected {
            return Err(AuditError::Turn { index, expected });
        }
        if !m.condition.extends(prev) {
            return Err(AuditError::Chain { index });
        }
        let ok = match &m.condition.cert {
            Certificate::Witness(w) => verify_witness(&oracle.theory, &m.condition.canonical(), &oracle.search, w),
            Certificate::Assumed(_) => oracle.policy == Policy::Optimistic,
        };
        if !ok {
            return Err(AuditError::Certificate { index });
        }
        prev = &m.condition;
        expected = expected.other();
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub side: Side,
    pub condition: Vec<WireBound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptFile {
    #[serde(default)]
    pub board: usize,
    #[serde(default)]
    pub theory: String,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub origin: Vec<WireBound>,
    pub moves: Vec<MoveRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forfeit: Option<Forfeit>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed transcript document: {0}")]
    Format(String),
    #[error("move {index}: {source}")]
    Condition { index: usize, source: ConditionError },
    #[error("move {index}: {source}")]
    Illegal { index: usize, source: Rejection },
    #[error("move {index}: recorded side {found} but {expected} was to move")]
    Turn { index: usize, found: Side, expected: Side },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Re-certifies every recorded move through the oracle and rebuilds the transcript.
pub fn replay(oracle: &Oracle, file: &TranscriptFile) -> Result<Transcript, ReplayError> {
    let sig = &oracle.theory.signature;
    let origin_bounds = parse_wire(&file.origin, sig).map_err(|source| ReplayError::Condition { index: 0, source })?;
    let origin = if origin_bounds.is_empty() {
        oracle.root()
    } else {
        oracle
            .certify_bounds(&origin_bounds)?
            .ok_or(ReplayError::Illegal { index: 0, source: Rejection::NotCondition("origin".into()) })?
    };
    let mut t = Transcript::new(file.board, origin);
    for (index, m) in file.moves.iter().enumerate() {
        if m.side != t.turn() {
            return Err(ReplayError::Turn { index, found: m.side, expected: t.turn() });
        }
        let bounds = parse_wire(&m.condition, sig).map_err(|source| ReplayError::Condition { index, source })?;
        let proposal = Condition { bounds: bounds.into_iter().collect(), cert: Certificate::Assumed("replay".into()) };
        let q = legal_move(oracle, &t, &proposal).map_err(|source| ReplayError::Illegal { index, source })?;
        t.push(q);
    }
    t.forfeit = file.forfeit.clone();
    Ok(t)
}

pub fn replay_json(oracle: &Oracle, text: &str) -> Result<Transcript, ReplayError> {
    let file: TranscriptFile = serde_json::from_str(text).map_err(|e| ReplayError::Format(e.to_string()))?;
    replay(oracle, &file)
}

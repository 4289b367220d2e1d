//! Transcripts, the play loop, compilation of plays, strategy combinators and the
//! multi-board and splitting variants.

pub mod compile;
pub mod play;
pub mod strategy;
pub mod transcript;

pub use compile::{compile, compile_condition, compile_loose, definitive_at, definitive_check, CompileError, CompiledApprox, CompiledReport};
pub use play::{
    lift_constants, lift_pairwise, play, play_from, play_multi, play_splitting, LiftedPairwise, MultiStrategy,
    OppositeAtom, PairStrategy, PerBoard, SplitTree, StallSplit, StallTree, TreeAdversary, TreeStrategy,
};
pub use strategy::{
    conjoin, transport, transport_condition, LedgerEntry, Mischief, RandomLegal, Stall, Strategy, Task, TaskStatus,
    TaskStrategy, Transported,
};
pub use transcript::{audit, legal_move, replay, replay_json, AuditError, Forfeit, Move, MoveRecord, Rejection, Side, Transcript, TranscriptFile};

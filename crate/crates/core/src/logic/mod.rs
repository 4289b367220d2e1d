//! Signatures, the restricted-formula language, parsing and exact evaluation.

pub mod classify;
pub mod derived;
pub mod enumerate;
pub mod eval;
pub mod formula;
pub mod parse;
pub mod seminorm;
pub mod signature;

pub use classify::{classify, Classification};
pub use derived::{derived, Derived};
pub use eval::{eval, eval_sentence, Assignment, EvalError};
pub use formula::{Formula, Term};
pub use parse::{parse_formula, parse_term, ParseError};
pub use seminorm::seminorm_lower_bound;
pub use signature::{Signature, SignatureError, Symbol, METRIC};

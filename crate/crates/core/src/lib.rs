//! Model-building games for continuous first-order logic over finite, exactly represented
//! structures.

pub mod dyadic;
pub mod logic;
pub mod structures;
pub mod oracle;
pub mod forcing;
pub mod game;
pub mod etypes;
pub mod enforcers;
pub mod session;
pub mod verify;

pub use dyadic::Dyadic;
pub use logic::{Formula, Signature, Term};
pub use structures::FiniteStructure;

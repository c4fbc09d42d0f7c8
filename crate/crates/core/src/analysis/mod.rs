//! Process maps, fidelities, success probabilities, gate reports and the
//! parameter search for post-selected gates.

mod gates;
mod optimize;
mod process;
mod report;

pub use gates::*;
pub use optimize::*;
pub use process::*;
pub use report::*;

//! Causal DAGs over named variables, background knowledge, and the
//! structural queries used by discovery and the structural model.

mod dag;
mod dsep;
mod knowledge;

pub use dag::CausalDag;
pub use dsep::{BlockingSet, Triple};
pub use knowledge::{Knowledge, Violation};

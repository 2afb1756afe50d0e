//! Score-based structure learning over discrete data.
//!
//! A greedy hill climb over DAGs (forward additions, backward deletions,
//! reversal sweeps) maximises a decomposable BIC under background knowledge.
//! [`Pattern`] and [`shd`] compare results up to Markov equivalence.

mod bic;
mod pattern;
mod search;

pub use bic::{bic_local, total_bic, LocalScoreCache};
pub use pattern::{cpdag_of, shd, EdgeMark, Pattern};
pub use search::{greedy_search, Move, MoveKind, SearchConfig, SearchTrace};

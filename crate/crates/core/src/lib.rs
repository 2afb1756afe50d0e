//! Causal discrete-choice modelling.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`discovery`] learns a causal DAG from discrete observations with a
//!    decomposable BIC score and background [`graph::Knowledge`].
//! 2. [`scm`] attaches one residual-logit mechanism (categorical or ordinal)
//!    to every endogenous variable of the DAG and trains them jointly under
//!    the Markov factorisation.
//! 3. [`counterfactual`] abducts per-individual utility residuals with a
//!    planar-flow VAE, applies hard or soft interventions, and re-predicts.
//! 4. [`cli`] ties the stages into reproducible command-line runs.

pub mod cli;
pub mod counterfactual;
pub mod data;
pub mod discovery;
mod error;
pub mod graph;
pub mod math;
pub mod scm;
pub mod tensorfile;

pub use error::{Error, Result};

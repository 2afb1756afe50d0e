//! Numerical core shared by every trainable model: stable activations, a
//! define-by-run reverse-mode tape, the [`Real`] abstraction that lets model
//! code run on plain `f64` or on tape variables, and RMSprop.

mod activation;
mod optim;
mod real;
mod tape;

pub use activation::{
    log_sigmoid, sigmoid, sigmoid_unchecked, softmax, softmax_unchecked, softplus,
    softplus_unchecked,
};
pub use optim::{rmsprop_step, OptimizerState};
pub use real::Real;
pub(crate) use real::{log_softmax_at, softmax_real};
pub use tape::{Tape, Var};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RMSprop state: running average of squared gradients per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub avg_sq: Vec<f64>,
    pub steps: u64,
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self::with_constants(len, learning_rate, 0.9, 1e-8)
    }

    pub fn with_constants(len: usize, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            avg_sq: vec![0.0; len],
            steps: 0,
            learning_rate,
            decay,
            epsilon,
        }
    }
}

/// One RMSprop update, in place:
/// `avg ← ρ·avg + (1−ρ)·g²`, `p ← p − lr·g / (√avg + ε)`.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.avg_sq.len() {
        return Err(Error::Structural(format!(
            "rmsprop shapes differ: {} params, {} grads, {} state",
            params.len(),
            grads.len(),
            state.avg_sq.len()
        )));
    }
    if !(state.learning_rate > 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {}",
            state.learning_rate
        )));
    }
    let rho = state.decay;
    for ((p, &g), avg) in params.iter_mut().zip(grads).zip(state.avg_sq.iter_mut()) {
        *avg = rho * *avg + (1.0 - rho) * g * g;
        *p -= state.learning_rate * g / (avg.sqrt() + state.epsilon);
    }
    state.steps += 1;
    Ok(())
}

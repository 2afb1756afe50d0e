use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Design, Scm};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{rmsprop_step, OptimizerState, Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Residual layers M.
    pub layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Range for the initial `P(x > 1)` of ordinal mechanisms.
    pub threshold_range: (f64, f64),
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Half-width of the uniform draw for initial β.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            learning_rate: 0.01,
            batch_size: 64,
            threshold_range: (0.3, 0.6),
            max_epochs: 100,
            patience: 10,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.threshold_range;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::Config("threshold_range must satisfy 0 < lo ≤ hi < 1".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("init_scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean negative log-likelihood per row.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the best validation epoch.
    pub scm: Scm,
    /// Epoch 0 holds the losses at initialisation.
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl FitOutcome {
    pub fn best(&self) -> &EpochRecord {
        &self.log[self.best_epoch]
    }
}

fn mean_loss(scm: &Scm, designs: &[Design], n: usize) -> f64 {
    let mut total = 0.0;
    for (m, d) in scm.mechanisms().iter().zip(designs) {
        for (r, &y) in d.y.iter().enumerate() {
            total += m.log_prob(m.params(), &d.x[r * d.width..(r + 1) * d.width], y, 0.0).0;
        }
    }
    -total / n.max(1) as f64
}

/// Negative mean joint log-likelihood over `rows`, taped, and its gradient
/// with respect to the flat parameter vector.
fn batch_gradient(scm: &Scm, designs: &[Design], rows: &[usize], flat: &[f64]) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::new();
    let vars = tape.vars(flat);
    let zero = tape.constant(0.0);
    let offs = scm.offsets();
    let mut terms = Vec::with_capacity(rows.len() * designs.len());
    for &r in rows {
        for (i, (m, d)) in scm.mechanisms().iter().zip(designs).enumerate() {
            let p = &vars[offs[i]..offs[i + 1]];
            let x = &d.x[r * d.width..(r + 1) * d.width];
            terms.push(m.log_prob(p, x, d.y[r], zero).0);
        }
    }
    if terms.is_empty() {
        return Ok((0.0, vec![0.0; flat.len()]));
    }
    let loss: Var<'_> = -Var::sum(&terms) / rows.len() as f64;
    let grad = tape.gradient(&loss, &vars)?;
    Ok((loss.value(), grad))
}

/// Mean negative joint log-likelihood over all rows of `data` (parents at
/// their observed values) and its gradient in [`Scm::flat_params`] order.
/// Entries fixed for identification get a zero gradient.
pub fn loss_and_gradient(scm: &Scm, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    let designs = scm.designs(data)?;
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let (loss, mut grad) = batch_gradient(scm, &designs, &rows, &scm.flat_params())?;
    for (g, f) in grad.iter_mut().zip(scm.flat_trainable()) {
        if !f {
            *g = 0.0;
        }
    }
    Ok((loss, grad))
}

/// Minibatch RMSprop on the negative joint log-likelihood with every
/// mechanism conditioned on observed parents, keeping the parameters of the
/// best validation epoch.
pub fn fit(scm: &Scm, train: &Dataset, val: &Dataset, cfg: &FitConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.n_rows() == 0 {
        return Err(Error::Config("empty training set".into()));
    }
    let train_d = scm.designs(train)?;
    let val_d = scm.designs(val)?;
    let mut model = scm.clone();
    let mut flat = model.flat_params();
    let free = model.flat_trainable();
    let mut opt = OptimizerState::new(flat.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let n = train.n_rows();
    let val_loss_of = |m: &Scm| if val.n_rows() == 0 { mean_loss(m, &train_d, n) } else { mean_loss(m, &val_d, val.n_rows()) };
    let first = EpochRecord {
        epoch: 0,
        train_loss: mean_loss(&model, &train_d, n),
        val_loss: val_loss_of(&model),
    };
    if !first.train_loss.is_finite() || !first.val_loss.is_finite() {
        return Err(Error::Numeric("initial loss is not finite".into()));
    }
    let mut log = vec![first];
    let mut best = (0usize, first.val_loss, model.clone());
    let mut order: Vec<usize> = (0..n).collect();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (loss, mut grad) = batch_gradient(&model, &train_d, batch, &flat)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(diverged(epoch, &best));
            }
            for (g, &f) in grad.iter_mut().zip(&free) {
                if !f {
                    *g = 0.0;
                }
            }
            rmsprop_step(&mut flat, &grad, &mut opt)?;
            model.set_flat_params(&flat)?;
        }
        let rec = EpochRecord {
            epoch,
            train_loss: mean_loss(&model, &train_d, n),
            val_loss: val_loss_of(&model),
        };
        if !rec.train_loss.is_finite() || !rec.val_loss.is_finite() {
            return Err(diverged(epoch, &best));
        }
        log.push(rec);
        if rec.val_loss < best.1 {
            best = (epoch, rec.val_loss, model.clone());
        } else if epoch - best.0 >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    Ok(FitOutcome {
        scm: best.2,
        log,
        best_epoch: best.0,
        stopped_early,
    })
}

fn diverged(epoch: usize, best: &(usize, f64, Scm)) -> Error {
    Error::Numeric(format!(
        "training diverged in epoch {epoch}; last finite state: epoch {} with validation loss {}",
        best.0, best.1
    ))
}

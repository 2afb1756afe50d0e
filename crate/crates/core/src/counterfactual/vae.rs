use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::flow::{flow_forward_raw, PlanarLayer};
use super::mlp::Mlp;
use crate::data::{Dataset, Value};
use crate::error::{Error, Result};
use crate::math::{log_softmax_at, rmsprop_step, OptimizerState, Real, Tape, Var};
use crate::scm::{encode_row, parent_features, Feature, Mechanism, MechanismKind, ParentInfo, ParentValue};
use crate::tensorfile::{Tensor, TensorFile};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const FORMAT_TAG: &str = "causal-choice/fvae";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Hidden layers of both encoder and decoder (4 or 6).
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub flows: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 4,
            hidden_width: 16,
            flows: 4,
            learning_rate: 0.01,
            batch_size: 64,
            max_epochs: 30,
            patience: 5,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers != 4 && self.hidden_layers != 6 {
            return Err(Error::Config("hidden_layers must be 4 or 6".into()));
        }
        if self.hidden_width == 0 || self.batch_size == 0 {
            return Err(Error::Config("hidden_width and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Reconstruction target for one parent column.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Category(usize),
    Real(f64),
}

/// Per-row averages of the ELBO pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElboParts {
    pub log_q0: f64,
    pub log_det: f64,
    pub log_prior: f64,
    pub log_recon: f64,
}

impl ElboParts {
    /// `ln Q₀ − log-det − ln p(γ_K)`, a single-sample KL estimate.
    pub fn kl(&self) -> f64 {
        self.log_q0 - self.log_det - self.log_prior
    }

    /// Negative ELBO.
    pub fn loss(&self) -> f64 {
        self.kl() - self.log_recon
    }
}

/// Encoder, planar-flow stack and decoder for abducting the latent of one
/// mechanism. The latent dimension equals the mechanism's K.
///
/// Flat parameter layout: `encoder | flows ([ũ | w | b] per layer) | decoder`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVae {
    target: String,
    latent: usize,
    parents: Vec<ParentInfo>,
    features: Vec<Feature>,
    encoder: Mlp,
    n_flows: usize,
    decoder: Mlp,
    #[serde(skip)]
    params: Vec<f64>,
}

impl FlowVae {
    pub fn new(mechanism: &Mechanism, cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        if matches!(mechanism.kind(), MechanismKind::Constant { .. }) {
            return Err(Error::Structural(format!(
                "`{}` is a constant mechanism and has no latent",
                mechanism.child()
            )));
        }
        let parents = mechanism.parents().to_vec();
        let features = parent_features(&parents)?;
        let d = mechanism.k();
        let hidden = vec![cfg.hidden_width; cfg.hidden_layers];
        let out: usize = parents.iter().map(|p| if p.is_discrete() { p.labels.len() } else { 1 }).sum();
        let encoder = Mlp::new(features.len(), &hidden, 2 * d);
        let decoder = Mlp::new(d, &hidden, out);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = encoder.init(&mut rng);
        for _ in 0..cfg.flows {
            for _ in 0..2 * d {
                params.push(rng.random_range(-0.1..=0.1));
            }
            params.push(0.0);
        }
        params.extend(decoder.init(&mut rng));
        Ok(Self {
            target: mechanism.child().to_string(),
            latent: d,
            parents,
            features,
            encoder,
            n_flows: cfg.flows,
            decoder,
            params,
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn latent_dim(&self) -> usize {
        self.latent
    }

    pub fn hidden_layers(&self) -> usize {
        self.encoder.hidden_layers()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params.len() {
            return Err(Error::Structural(format!(
                "flow model has {} parameters, got {}",
                self.params.len(),
                p.len()
            )));
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    /// Zero every encoder weight and bias.
    pub fn zero_encoder(&mut self) {
        let n = self.encoder.n_params();
        self.params[..n].iter_mut().for_each(|x| *x = 0.0);
    }

    fn flow_range(&self) -> std::ops::Range<usize> {
        let s = self.encoder.n_params();
        s..s + self.n_flows * (2 * self.latent + 1)
    }

    /// Set every flow's `ũ` and `w` to zero, making the stack the identity.
    pub fn make_flows_identity(&mut self) {
        let r = self.flow_range();
        self.params[r].iter_mut().for_each(|x| *x = 0.0);
    }

    /// The flow stack with corrected (invertible) `û`.
    pub fn flows(&self) -> Vec<PlanarLayer> {
        let d = self.latent;
        self.params[self.flow_range()]
            .chunks(2 * d + 1)
            .map(|c| PlanarLayer::from_raw(&c[..d], c[d..2 * d].to_vec(), c[2 * d]).expect("finite flow parameters"))
            .collect()
    }

    fn input(&self, pa: &[ParentValue]) -> Result<Vec<f64>> {
        encode_row(&self.features, &self.parents, pa, &self.target)
    }

    fn targets(&self, pa: &[ParentValue]) -> Result<Vec<Target>> {
        pa.iter()
            .map(|v| match v {
                ParentValue::Category(c) => Ok(Target::Category(*c)),
                ParentValue::Real(x) => Ok(Target::Real(*x)),
                ParentValue::Probs(_) => Err(Error::Evaluation(
                    "reconstruction needs observed parent values".into(),
                )),
            })
            .collect()
    }

    fn encode_with<T: Real>(&self, p: &[T], x: &[f64]) -> (Vec<T>, Vec<T>) {
        let out = self.encoder.forward_const(&p[..self.encoder.n_params()], x);
        let (mu, logvar) = out.split_at(self.latent);
        (mu.to_vec(), logvar.to_vec())
    }

    /// Posterior mean and standard deviation for one parent row.
    pub fn encode(&self, pa: &[ParentValue]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.input(pa)?;
        let (mu, logvar) = self.encode_with(&self.params, &x);
        let sigma: Vec<f64> = logvar.iter().map(|l| (0.5 * l).exp()).collect();
        if sigma.iter().chain(&mu).any(|s| !s.is_finite()) || sigma.iter().any(|&s| s <= 0.0) {
            return Err(Error::Numeric(format!("encoder for `{}` produced an invalid scale", self.target)));
        }
        Ok((mu, sigma))
    }

    /// `γ_K` for one row and one noise draw.
    pub fn latent(&self, pa: &[ParentValue], noise: &[f64]) -> Result<Vec<f64>> {
        let (mu, sigma) = self.encode(pa)?;
        let g0 = reparameterize(&mu, &sigma, noise)?;
        Ok(super::flow::flow_forward(&self.flows(), &g0)?.0)
    }

    /// `(ln Q₀, log-det, ln p(γ_K), ln p(Pa | γ_K))` for one row.
    fn row_terms<T: Real>(&self, p: &[T], x: &[f64], targets: &[Target], noise: &[f64], zero: T) -> [T; 4] {
        let d = self.latent;
        let (mu, logvar) = self.encode_with(p, x);
        let mut g0 = Vec::with_capacity(d);
        let mut log_q0 = zero;
        for i in 0..d {
            let sigma = (logvar[i] * 0.5).exp();
            let g = mu[i] + sigma * noise[i];
            let z = (g - mu[i]) / sigma;
            log_q0 = log_q0 - logvar[i] * 0.5 - z.square() * 0.5 - HALF_LN_2PI;
            g0.push(g);
        }
        let fr = self.flow_range();
        let (gk, log_det) = flow_forward_raw(&p[fr.clone()], self.n_flows, &g0, zero);
        let mut log_prior = zero;
        for &g in &gk {
            log_prior = log_prior - g.square() * 0.5 - HALF_LN_2PI;
        }
        let mut log_recon = zero;
        if self.decoder.output() > 0 {
            let out = self.decoder.forward(&p[fr.end..], &gk);
            let mut at = 0;
            for (info, t) in self.parents.iter().zip(targets) {
                match *t {
                    Target::Category(c) => {
                        let k = info.labels.len();
                        log_recon = log_recon + log_softmax_at(&out[at..at + k], c);
                        at += k;
                    }
                    Target::Real(v) => {
                        log_recon = log_recon - (out[at] - v).square() * 0.5 - HALF_LN_2PI;
                        at += 1;
                    }
                }
            }
        }
        [log_q0, log_det, log_prior, log_recon]
    }

    fn prepared(&self, rows: &[Vec<ParentValue>], noise: &[Vec<f64>]) -> Result<Vec<(Vec<f64>, Vec<Target>)>> {
        if rows.len() != noise.len() {
            return Err(Error::Structural("one noise draw per row is required".into()));
        }
        if noise.iter().any(|n| n.len() != self.latent) {
            return Err(Error::Structural(format!("noise draws must have length {}", self.latent)));
        }
        rows.iter().map(|pa| Ok((self.input(pa)?, self.targets(pa)?))).collect()
    }

    /// Mean ELBO pieces over `rows` with one noise vector per row.
    pub fn elbo_parts(&self, rows: &[Vec<ParentValue>], noise: &[Vec<f64>]) -> Result<ElboParts> {
        let prep = self.prepared(rows, noise)?;
        let mut acc = [0.0; 4];
        for ((x, t), e) in prep.iter().zip(noise) {
            let terms = self.row_terms(&self.params, x, t, e, 0.0);
            for (a, v) in acc.iter_mut().zip(terms) {
                *a += v;
            }
        }
        let n = rows.len().max(1) as f64;
        let parts = ElboParts {
            log_q0: acc[0] / n,
            log_det: acc[1] / n,
            log_prior: acc[2] / n,
            log_recon: acc[3] / n,
        };
        if !parts.loss().is_finite() {
            return Err(Error::Numeric(format!("ELBO for `{}` is not finite", self.target)));
        }
        Ok(parts)
    }

    /// Negative ELBO averaged over rows.
    pub fn elbo_loss(&self, rows: &[Vec<ParentValue>], noise: &[Vec<f64>]) -> Result<f64> {
        Ok(self.elbo_parts(rows, noise)?.loss())
    }

    /// Negative ELBO and its gradient with respect to [`FlowVae::params`].
    pub fn elbo_gradient(&self, rows: &[Vec<ParentValue>], noise: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let prep = self.prepared(rows, noise)?;
        self.gradient_prepared(&prep, noise)
    }

    fn gradient_prepared(&self, prep: &[(Vec<f64>, Vec<Target>)], noise: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let tape = Tape::new();
        let vars = tape.vars(&self.params);
        let zero = tape.constant(0.0);
        let mut terms = Vec::with_capacity(prep.len());
        for ((x, t), e) in prep.iter().zip(noise) {
            let [q0, ld, pr, rc] = self.row_terms(&vars, x, t, e, zero);
            terms.push(q0 - ld - pr - rc);
        }
        if terms.is_empty() {
            return Ok((0.0, vec![0.0; self.params.len()]));
        }
        let loss: Var<'_> = Var::sum(&terms) / prep.len() as f64;
        let grad = tape.gradient(&loss, &vars)?;
        Ok((loss.value(), grad))
    }

    /// Observed parent values of every row of `data`.
    pub fn parent_rows(&self, data: &Dataset) -> Result<Vec<Vec<ParentValue>>> {
        parent_rows(&self.parents, data)
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        TensorFile {
            meta: serde_json::json!({ "format": FORMAT_TAG, "model": self }),
            tensors: vec![Tensor::new("params", vec![self.params.len()], self.params.clone()).unwrap()],
        }
    }

    pub fn from_tensor_file(file: &TensorFile) -> Result<Self> {
        if file.meta.get("format").and_then(|v| v.as_str()) != Some(FORMAT_TAG) {
            return Err(Error::format("flow model file", "not a flow model file"));
        }
        let mut v: FlowVae = serde_json::from_value(
            file.meta.get("model").cloned().ok_or_else(|| Error::format("flow model file", "missing model"))?,
        )?;
        let p = &file.get("params")?.data;
        let expected = v.encoder.n_params() + v.n_flows * (2 * v.latent + 1) + v.decoder.n_params();
        if p.len() != expected {
            return Err(Error::format("flow model file", "wrong parameter count"));
        }
        v.params = p.clone();
        Ok(v)
    }
}

pub(crate) fn parent_rows(parents: &[ParentInfo], data: &Dataset) -> Result<Vec<Vec<ParentValue>>> {
    let cols: Vec<usize> = parents
        .iter()
        .map(|p| data.column_index(&p.name))
        .collect::<Result<_>>()?;
    Ok((0..data.n_rows())
        .map(|r| {
            cols.iter()
                .map(|&c| match data.value(r, c) {
                    Value::Cat(k) => ParentValue::Category(k),
                    Value::Real(x) => ParentValue::Real(x),
                })
                .collect()
        })
        .collect())
}

/// `γ₀ = μ + σ ⊙ noise`.
pub fn reparameterize(mu: &[f64], sigma: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != sigma.len() || mu.len() != noise.len() {
        return Err(Error::Structural("μ, σ and noise must have equal length".into()));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Numeric("σ must be positive".into()));
    }
    Ok(mu.iter().zip(sigma).zip(noise).map(|((m, s), e)| m + s * e).collect())
}

pub(crate) fn normal_draws<R: Rng>(rng: &mut R, rows: usize, d: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FlowFit {
    pub vae: FlowVae,
    pub log: Vec<FlowEpoch>,
    pub best_epoch: usize,
}

/// RMSprop on the negative ELBO with fresh noise per row and epoch; early
/// stopping on the validation ELBO evaluated with fixed noise.
pub fn fit_fvae(vae: &FlowVae, train: &Dataset, val: &Dataset, cfg: &FlowConfig) -> Result<FlowFit> {
    cfg.validate()?;
    let rows = vae.parent_rows(train)?;
    if rows.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let val_rows = vae.parent_rows(val)?;
    let d = vae.latent;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let train_eval_noise = normal_draws(&mut rng, rows.len(), d);
    let val_noise = normal_draws(&mut rng, val_rows.len(), d);
    let prep = vae.prepared(&rows, &train_eval_noise)?;
    let eval = |v: &FlowVae| -> Result<(f64, f64)> {
        let t = v.elbo_loss(&rows, &train_eval_noise)?;
        let vl = if val_rows.is_empty() { t } else { v.elbo_loss(&val_rows, &val_noise)? };
        Ok((t, vl))
    };

    let mut model = vae.clone();
    let (t0, v0) = eval(&model)?;
    let mut log = vec![FlowEpoch {
        epoch: 0,
        train_loss: t0,
        val_loss: v0,
    }];
    let mut best = (0usize, v0, model.clone());
    let mut opt = OptimizerState::new(model.params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let bp: Vec<(Vec<f64>, Vec<Target>)> = batch.iter().map(|&r| prep[r].clone()).collect();
            let noise = normal_draws(&mut rng, batch.len(), d);
            let (loss, grad) = model.gradient_prepared(&bp, &noise)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "flow model for `{}` diverged in epoch {epoch}; last finite state: epoch {} with validation loss {}",
                    model.target, best.0, best.1
                )));
            }
            rmsprop_step(&mut model.params, &grad, &mut opt)?;
        }
        let (t, v) = eval(&model).map_err(|e| {
            Error::Numeric(format!("flow model for `{}` diverged in epoch {epoch}: {e}", model.target))
        })?;
        log.push(FlowEpoch {
            epoch,
            train_loss: t,
            val_loss: v,
        });
        if v < best.1 {
            best = (epoch, v, model.clone());
        } else if epoch - best.0 >= cfg.patience {
            break;
        }
    }
    Ok(FlowFit {
        vae: best.2,
        log,
        best_epoch: best.0,
    })
}

/// `ε = γ_K − systematic utility`, with `γ_K` from the given noise draw.
pub fn abduct(vae: &FlowVae, mechanism: &Mechanism, pa: &[ParentValue], noise: &[f64]) -> Result<Vec<f64>> {
    if vae.target != mechanism.child() || vae.parents != mechanism.parents() || vae.latent != mechanism.k() {
        return Err(Error::Structural(format!(
            "flow model for `{}` does not match mechanism `{}`",
            vae.target,
            mechanism.child()
        )));
    }
    let g = vae.latent(pa, noise)?;
    let u = mechanism.systematic_utility(pa)?;
    Ok(g.iter().zip(&u).map(|(a, b)| a - b).collect())
}

/// `draws` stochastic samples of `γ_K` per row of `data`.
pub fn latent_samples(vae: &FlowVae, data: &Dataset, draws: usize, seed: u64) -> Result<Vec<(usize, Vec<f64>)>> {
    let rows = vae.parent_rows(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(rows.len() * draws);
    for (r, pa) in rows.iter().enumerate() {
        for e in normal_draws(&mut rng, draws, vae.latent) {
            out.push((r, vae.latent(pa, &e)?));
        }
    }
    Ok(out)
}

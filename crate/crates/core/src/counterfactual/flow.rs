use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Real;

/// Smallest admissible `wᵀû + 1`.
pub const INVERTIBILITY_MARGIN: f64 = 1e-9;

/// One planar layer `γ ↦ γ + u·tanh(wᵀγ + b)` with `wᵀu ≥ −1 + margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarLayer {
    u: Vec<f64>,
    w: Vec<f64>,
    b: f64,
}

impl PlanarLayer {
    /// A `u` violating the invertibility condition is replaced by its
    /// corrected version `û` (see [`u_hat`]).
    pub fn new(u: Vec<f64>, w: Vec<f64>, b: f64) -> Result<Self> {
        if u.len() != w.len() || u.is_empty() {
            return Err(Error::Structural("planar layer needs u and w of equal, non-zero length".into()));
        }
        if u.iter().chain(&w).any(|x| !x.is_finite()) || !b.is_finite() {
            return Err(Error::Domain("planar layer parameters must be finite".into()));
        }
        let wu: f64 = f64::dot(&w, &u);
        let u = if wu < -1.0 + INVERTIBILITY_MARGIN { u_hat(&u, &w) } else { u };
        Ok(Self { u, w, b })
    }

    /// Layer whose `u` is the corrected version of an unconstrained `raw_u`.
    pub fn from_raw(raw_u: &[f64], w: Vec<f64>, b: f64) -> Result<Self> {
        Self::new(u_hat(raw_u, &w), w, b)
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// `û = u + (m(wᵀu) − wᵀu)·w/‖w‖²`, `m(a) = −1 + 2·margin + softplus(a)`,
/// so that `wᵀû > −1 + margin` with room for rounding; `û = u` when `w = 0`.
pub fn u_hat<T: Real>(u: &[T], w: &[T]) -> Vec<T> {
    let wn = T::dot(w, w);
    if wn.value() == 0.0 {
        return u.to_vec();
    }
    let wu = T::dot(w, u);
    let scale = (wu.softplus() - (1.0 - 2.0 * INVERTIBILITY_MARGIN) - wu) / wn;
    u.iter().zip(w).map(|(&ui, &wi)| ui + scale * wi).collect()
}

/// Apply one layer with effective vector `u`; returns the new point and
/// `ln|1 + uᵀψ|` where `ψ = (1 − tanh²(wᵀγ + b))·w`.
pub(crate) fn planar_step<T: Real>(u: &[T], w: &[T], b: T, gamma: &[T]) -> (Vec<T>, T) {
    let h = (T::dot(w, gamma) + b).tanh();
    let det = (-h.square() + 1.0) * T::dot(w, u) + 1.0;
    let out = gamma.iter().zip(u).map(|(&g, &ui)| g + ui * h).collect();
    (out, det.ln())
}

/// Layers stored as consecutive raw `[ũ | w | b]` blocks of `p`; each `ũ`
/// goes through the correction first.
pub(crate) fn flow_forward_raw<T: Real>(p: &[T], n_layers: usize, gamma: &[T], zero: T) -> (Vec<T>, T) {
    let d = gamma.len();
    let stride = 2 * d + 1;
    let mut g = gamma.to_vec();
    let mut logdet = zero;
    for l in 0..n_layers {
        let blk = &p[l * stride..(l + 1) * stride];
        let (w, b) = (&blk[d..2 * d], blk[2 * d]);
        let uh = u_hat(&blk[..d], w);
        let (next, ld) = planar_step(&uh, w, b, &g);
        g = next;
        logdet = logdet + ld;
    }
    (g, logdet)
}

/// Push `gamma0` through the layers; returns `γ_K` and the total log-det.
pub fn flow_forward(flows: &[PlanarLayer], gamma0: &[f64]) -> Result<(Vec<f64>, f64)> {
    if flows.iter().any(|f| f.dim() != gamma0.len()) {
        return Err(Error::Structural("flow dimension differs from the latent".into()));
    }
    let mut g = gamma0.to_vec();
    let mut total = 0.0;
    for f in flows {
        let (next, ld) = planar_step(&f.u, &f.w, f.b, &g);
        g = next;
        total += ld;
    }
    if !total.is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite value inside the flow".into()));
    }
    Ok((g, total))
}

use crate::error::{Error, Result};

fn finite(x: f64, op: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Domain(format!("{op} of non-finite value {x}")))
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus_unchecked(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn softplus(x: f64) -> Result<f64> {
    finite(x, "softplus").map(softplus_unchecked)
}

#[inline]
pub fn sigmoid_unchecked(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: f64) -> Result<f64> {
    finite(x, "sigmoid").map(sigmoid_unchecked)
}

/// `ln σ(x)`, accurate in both tails.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus_unchecked(-x)
}

/// Max-shifted softmax. The summation order is sequential over `v`.
pub fn softmax_unchecked(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let mut s = 0.0;
    for &x in &e {
        s += x;
    }
    e.into_iter().map(|x| x / s).collect()
}

pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    for &x in v {
        finite(x, "softmax")?;
    }
    Ok(softmax_unchecked(v))
}

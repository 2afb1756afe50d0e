use std::ops::{Add, Div, Mul, Neg, Sub};

use super::activation::{sigmoid_unchecked, softplus_unchecked};
use super::tape::Var;

/// Scalar arithmetic shared by plain `f64` evaluation and taped evaluation.
///
/// Model code is written once against this trait: prediction runs on `f64`,
/// training runs on [`Var`] and gets gradients from the tape.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant living wherever `self` lives (same tape for `Var`).
    fn lift(&self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn softplus(self) -> Self;
    fn sigmoid(self) -> Self;
    fn square(self) -> Self;
    /// `Σ w_i x_i`, accumulated left to right from zero. `w` must be non-empty.
    fn dot_const(w: &[Self], x: &[f64]) -> Self;
    /// `Σ w_i x_i`, accumulated left to right from zero. `w` must be non-empty.
    fn dot(w: &[Self], x: &[Self]) -> Self;
    /// Left-to-right sum. `xs` must be non-empty.
    fn sum(xs: &[Self]) -> Self;
}

impl Real for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn lift(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn softplus(self) -> Self {
        softplus_unchecked(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid_unchecked(self)
    }
    #[inline]
    fn square(self) -> Self {
        self * self
    }
    fn dot_const(w: &[Self], x: &[f64]) -> Self {
        debug_assert_eq!(w.len(), x.len());
        let mut acc = 0.0;
        for (a, b) in w.iter().zip(x) {
            acc += a * b;
        }
        acc
    }
    fn dot(w: &[Self], x: &[Self]) -> Self {
        Self::dot_const(w, x)
    }
    fn sum(xs: &[Self]) -> Self {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        acc
    }
}

impl Real for Var<'_> {
    fn value(&self) -> f64 {
        Var::value(self)
    }
    fn lift(&self, c: f64) -> Self {
        self.tape().constant(c)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn ln(self) -> Self {
        Var::ln(self)
    }
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
    fn softplus(self) -> Self {
        Var::softplus(self)
    }
    fn sigmoid(self) -> Self {
        Var::sigmoid(self)
    }
    fn square(self) -> Self {
        Var::square(self)
    }
    fn dot_const(w: &[Self], x: &[f64]) -> Self {
        Var::dot_const(w, x)
    }
    fn dot(w: &[Self], x: &[Self]) -> Self {
        Var::dot(w, x)
    }
    fn sum(xs: &[Self]) -> Self {
        Var::sum(xs)
    }
}

/// Numerically stable softmax over any [`Real`], same operation order as
/// [`super::softmax_unchecked`].
pub(crate) fn softmax_real<T: Real>(v: &[T]) -> Vec<T> {
    let mut max = v[0];
    for x in &v[1..] {
        if x.value() > max.value() {
            max = *x;
        }
    }
    let m = max.value();
    let e: Vec<T> = v.iter().map(|&x| (x - m).exp()).collect();
    let s = T::sum(&e);
    e.into_iter().map(|x| x / s).collect()
}

/// `ln softmax(v)[k]`.
pub(crate) fn log_softmax_at<T: Real>(v: &[T], k: usize) -> T {
    let m = v
        .iter()
        .map(|x| x.value())
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<T> = v.iter().map(|&x| (x - m).exp()).collect();
    (v[k] - m) - T::sum(&e).ln()
}

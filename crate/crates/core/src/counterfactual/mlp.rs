use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::Real;

/// Fully connected network: tanh on hidden layers, identity on the output.
/// Parameters are external (a flat slice) so the same shape serves plain and
/// taped evaluation. Layer `(in, out)` stores `W` row-major then `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self { sizes }
    }

    pub fn input(&self) -> usize {
        self.sizes[0]
    }

    pub fn output(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn hidden_layers(&self) -> usize {
        self.sizes.len() - 2
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for w in self.sizes.windows(2) {
            let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                p.push(rng.random_range(-a..=a));
            }
            p.extend(std::iter::repeat_n(0.0, w[1]));
        }
        p
    }

    /// Forward pass on a constant input.
    pub fn forward_const<T: Real>(&self, p: &[T], x: &[f64]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.input());
        let (n_in, n_out) = (self.sizes[0], self.sizes[1]);
        let b0 = n_in * n_out;
        let h: Vec<T> = (0..n_out)
            .map(|j| {
                let pre = if n_in == 0 {
                    p[b0 + j]
                } else {
                    T::dot_const(&p[j * n_in..(j + 1) * n_in], x) + p[b0 + j]
                };
                self.activate(pre, 0)
            })
            .collect();
        self.rest(p, h, b0 + n_out, 1)
    }

    pub fn forward<T: Real>(&self, p: &[T], x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.input());
        self.rest(p, x.to_vec(), 0, 0)
    }

    fn rest<T: Real>(&self, p: &[T], mut h: Vec<T>, mut off: usize, first: usize) -> Vec<T> {
        for l in first..self.sizes.len() - 1 {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let b = off + n_in * n_out;
            h = (0..n_out)
                .map(|j| {
                    let pre = if n_in == 0 {
                        p[b + j]
                    } else {
                        T::dot(&p[off + j * n_in..off + (j + 1) * n_in], &h) + p[b + j]
                    };
                    self.activate(pre, l)
                })
                .collect();
            off = b + n_out;
        }
        h
    }

    fn activate<T: Real>(&self, x: T, layer: usize) -> T {
        if layer + 2 < self.sizes.len() {
            x.tanh()
        } else {
            x
        }
    }
}

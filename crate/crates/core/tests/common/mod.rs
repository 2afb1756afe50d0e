#![allow(dead_code)]

use causal_choice::data::{Column, Dataset, VariableSpec};
use causal_choice::graph::CausalDag;
use causal_choice::scm::{FitConfig, Scm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A small mode-choice world: income and age are exogenous, attitude is
/// ordinal, mode is categorical with a car-specific cost attribute.
pub fn toy_specs() -> Vec<VariableSpec> {
    vec![
        VariableSpec::categorical("income", &["low", "mid", "high"]).exogenous(),
        VariableSpec::continuous("age").exogenous(),
        VariableSpec::continuous("car_cost").exogenous().attached_to("mode", "car"),
        VariableSpec::ordinal("attitude", &["neg", "neutral", "pos"]),
        VariableSpec::categorical("mode", &["walk", "bus", "car"]),
    ]
}

pub fn toy_dag() -> CausalDag {
    CausalDag::from_edges(
        &["income", "age", "car_cost", "attitude", "mode"],
        &[
            ("income", "attitude"),
            ("age", "attitude"),
            ("income", "mode"),
            ("attitude", "mode"),
            ("car_cost", "mode"),
        ],
    )
    .unwrap()
}

/// Uniform categories and standard-normal reals.
pub fn random_data(specs: &[VariableSpec], n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = specs
        .iter()
        .map(|s| {
            if s.is_discrete() {
                Column::Discrete((0..n).map(|_| rng.random_range(0..s.cardinality())).collect())
            } else {
                Column::Continuous((0..n).map(|_| rng.sample(StandardNormal)).collect())
            }
        })
        .collect();
    Dataset::new(specs.to_vec(), columns).unwrap()
}

/// The toy model with every free parameter drawn from `±scale`.
pub fn random_toy_scm(layers: usize, seed: u64, scale: f64) -> Scm {
    let cfg = FitConfig {
        layers,
        seed,
        ..FitConfig::default()
    };
    let mut scm = Scm::build(&toy_dag(), &toy_specs(), None, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let free = scm.flat_trainable();
    let flat: Vec<f64> = scm
        .flat_params()
        .iter()
        .zip(&free)
        .map(|(&p, &f)| if f { rng.random_range(-scale..=scale) } else { p })
        .collect();
    scm.set_flat_params(&flat).unwrap();
    scm
}

/// Central finite difference of `f` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[i] += h;
    b[i] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|)`, with the denominator floored at `1e-6` so that
/// gradients which vanish analytically are compared absolutely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// `ln |det A|` by Gaussian elimination with partial pivoting.
pub fn log_abs_det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let piv = a[c][c];
        acc += piv.abs().ln();
        for r in c + 1..n {
            let f = a[r][c] / piv;
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    acc
}

/// Plain multinomial logit: `softmax(B x)` with a max shift, written out
/// directly.
pub fn plain_mnl(beta: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = beta
        .iter()
        .map(|row| {
            let mut s = 0.0;
            for (b, xi) in row.iter().zip(x) {
                s += b * xi;
            }
            s
        })
        .collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|vi| (vi - m).exp()).collect();
    let mut total = 0.0;
    for ei in &e {
        total += ei;
    }
    e.iter().map(|ei| ei / total).collect()
}

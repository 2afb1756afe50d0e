use std::collections::HashMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalDag;

const DENSE_LIMIT: usize = 1 << 22;

/// BIC contribution of `child` given `parents` (column indices of `data`):
/// the maximised multinomial log-likelihood of the child within each parent
/// configuration, minus `(ln N / 2)·q·(K − 1)` with `q` the number of parent
/// configurations. Empty configurations contribute nothing to the fit term
/// but still count in the penalty.
pub fn bic_local(data: &Dataset, child: usize, parents: &[usize]) -> Result<f64> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Config("BIC needs at least one row".into()));
    }
    let y = data.discrete(child)?;
    let k = data.spec(child).cardinality();
    let cols: Vec<&[usize]> = parents.iter().map(|&p| data.discrete(p)).collect::<Result<_>>()?;
    let cards: Vec<usize> = parents.iter().map(|&p| data.spec(p).cardinality()).collect();
    let q: usize = cards.iter().product();

    let config = |r: usize| -> usize {
        let mut idx = 0;
        for (col, &card) in cols.iter().zip(&cards) {
            idx = idx * card + col[r];
        }
        idx
    };
    let loglik = if q.saturating_mul(k) <= DENSE_LIMIT {
        let mut counts = vec![0u32; q * k];
        for r in 0..n {
            counts[config(r) * k + y[r]] += 1;
        }
        counts.chunks(k).map(cell_loglik).sum::<f64>()
    } else {
        let mut counts: HashMap<usize, Vec<u32>> = HashMap::new();
        for r in 0..n {
            counts.entry(config(r)).or_insert_with(|| vec![0; k])[y[r]] += 1;
        }
        let mut keys: Vec<&usize> = counts.keys().collect();
        keys.sort_unstable();
        keys.into_iter().map(|key| cell_loglik(&counts[key])).sum()
    };
    let penalty = 0.5 * (n as f64).ln() * q as f64 * (k - 1) as f64;
    Ok(loglik - penalty)
}

fn cell_loglik(counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let c = c as f64;
            c * (c / t).ln()
        })
        .sum()
}

/// Sum of local scores over every variable of `dag`; DAG variable `i` is
/// looked up by name in `data`.
pub fn total_bic(data: &Dataset, dag: &CausalDag) -> Result<f64> {
    let cols: Vec<usize> = dag
        .names()
        .iter()
        .map(|n| data.column_index(n))
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for v in 0..dag.len() {
        let pa: Vec<usize> = dag.parents(v).iter().map(|&p| cols[p]).collect();
        total += bic_local(data, cols[v], &pa)?;
    }
    Ok(total)
}

/// Memoised local scores keyed by `(child, sorted parents)`.
#[derive(Debug)]
pub struct LocalScoreCache<'d> {
    data: &'d Dataset,
    scores: HashMap<(usize, Vec<usize>), f64>,
}

impl<'d> LocalScoreCache<'d> {
    pub fn new(data: &'d Dataset) -> Self {
        Self {
            data,
            scores: HashMap::new(),
        }
    }

    pub fn sample_size(&self) -> usize {
        self.data.n_rows()
    }

    pub fn score(&mut self, child: usize, parents: &[usize]) -> Result<f64> {
        let mut key = parents.to_vec();
        key.sort_unstable();
        if let Some(&s) = self.scores.get(&(child, key.clone())) {
            return Ok(s);
        }
        let s = bic_local(self.data, child, &key)?;
        self.scores.insert((child, key), s);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

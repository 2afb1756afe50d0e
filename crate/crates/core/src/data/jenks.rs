use crate::error::{Error, Result};

/// Jenks natural breaks: the `k − 1` class upper bounds that minimise the
/// total within-class sum of squared deviations over all contiguous
/// partitions of the sorted values.
///
/// Classes are runs of distinct values, so equal values never straddle a
/// break. Exact dynamic programme, `O(k·m²)` for `m` distinct values; among
/// equally good partitions the one whose breaks sit furthest left wins.
pub fn jenks_breaks(values: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {k}")));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("Jenks breaks of non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for x in sorted {
        if distinct.last() == Some(&x) {
            *counts.last_mut().unwrap() += 1.0;
        } else {
            distinct.push(x);
            counts.push(1.0);
        }
    }
    let m = distinct.len();
    if m < k {
        return Err(Error::Config(format!(
            "{m} distinct values cannot form {k} classes"
        )));
    }

    // Centre before accumulating to keep the prefix sums well conditioned.
    let total: f64 = counts.iter().sum();
    let centre = distinct.iter().zip(&counts).map(|(x, c)| x * c).sum::<f64>() / total;
    let mut w = vec![0.0; m + 1];
    let mut s = vec![0.0; m + 1];
    let mut s2 = vec![0.0; m + 1];
    for i in 0..m {
        let y = distinct[i] - centre;
        w[i + 1] = w[i] + counts[i];
        s[i + 1] = s[i] + counts[i] * y;
        s2[i + 1] = s2[i] + counts[i] * y * y;
    }
    // SSE of distinct values i..=j
    let sse = |i: usize, j: usize| -> f64 {
        let ww = w[j + 1] - w[i];
        let ss = s[j + 1] - s[i];
        (s2[j + 1] - s2[i] - ss * ss / ww).max(0.0)
    };

    // cost[c][j]: best SSE of values 0..=j split into c + 1 classes;
    // start[c][j]: first value index of the last class in that split.
    let mut cost = vec![vec![f64::INFINITY; m]; k];
    let mut start = vec![vec![0usize; m]; k];
    for j in 0..m {
        cost[0][j] = sse(0, j);
    }
    for c in 1..k {
        for j in c..m {
            let mut best = f64::INFINITY;
            let mut arg = c;
            for i in c..=j {
                let v = cost[c - 1][i - 1] + sse(i, j);
                if v < best {
                    best = v;
                    arg = i;
                }
            }
            cost[c][j] = best;
            start[c][j] = arg;
        }
    }
    let mut breaks = vec![0.0; k - 1];
    let mut j = m - 1;
    for c in (1..k).rev() {
        let i = start[c][j];
        breaks[c - 1] = distinct[i - 1];
        j = i - 1;
    }
    Ok(breaks)
}

/// Category index for each value: the number of breaks strictly below it,
/// so a value equal to a break stays in the lower class.
pub fn discretize(values: &[f64], breaks: &[f64]) -> Vec<usize> {
    debug_assert!(breaks.windows(2).all(|w| w[0] <= w[1]), "breaks must be sorted");
    values
        .iter()
        .map(|&x| breaks.partition_point(|&b| b < x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_clusters() {
        assert_eq!(jenks_breaks(&[1.0, 2.0, 10.0, 11.0], 2).unwrap(), vec![2.0]);
        assert_eq!(jenks_breaks(&[0.0, 0.0, 0.0, 5.0, 5.0], 2).unwrap(), vec![0.0]);
    }

    #[test]
    fn one_class_per_distinct_value() {
        let v = [3.0, 1.0, 2.0, 2.0, 1.0];
        let b = jenks_breaks(&v, 3).unwrap();
        assert_eq!(b, vec![1.0, 2.0]);
        assert_eq!(discretize(&v, &b), vec![2, 0, 1, 1, 0]);
    }

    #[test]
    fn too_few_distinct_values() {
        assert!(jenks_breaks(&[1.0, 1.0, 2.0], 3).is_err());
        assert!(jenks_breaks(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn strict_inequality_at_the_break() {
        assert_eq!(discretize(&[6.0], &[5.0]), vec![1]);
        assert_eq!(discretize(&[0.59], &[0.59]), vec![0]);
        assert_eq!(discretize(&[-3.0], &[0.0, 1.0]), vec![0]);
        assert_eq!(discretize(&[7.9, 7.8], &[7.8]), vec![1, 0]);
    }

    #[test]
    fn idempotent_on_discretised_columns() {
        let col = [1.0, 3.0, 2.0, 2.0, 1.0, 3.0];
        let once = discretize(&col, &jenks_breaks(&col, 3).unwrap());
        let as_real: Vec<f64> = once.iter().map(|&c| c as f64).collect();
        let twice = discretize(&as_real, &jenks_breaks(&as_real, 3).unwrap());
        assert_eq!(once, twice);
    }
}

use causal_choice::data::{read_csv, simulate, GeneratorConfig};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square p-value for independence of two discrete columns.
fn independence_p_value(a: &[usize], ka: usize, b: &[usize], kb: usize) -> f64 {
    let n = a.len() as f64;
    let mut table = vec![vec![0.0; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                stat += (table[i][j] - e).powi(2) / e;
            }
        }
    }
    let used_r = rows.iter().filter(|&&r| r > 0.0).count();
    let used_c = cols.iter().filter(|&&c| c > 0.0).count();
    let df = ((used_r - 1) * (used_c - 1)) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn zero_coefficients_give_independent_columns() {
    let mut successes = 0;
    for seed in 0..10 {
        let mut gen = GeneratorConfig::pedestrian_study(2500, seed);
        for e in &mut gen.endogenous {
            for c in &mut e.coefficients {
                c.value = 0.0;
            }
        }
        let data = simulate(&gen).unwrap();
        let dag = gen.dag().unwrap();
        let all_pass = ["stress_level", "wait_time", "density_perception"].iter().all(|child| {
            let ci = data.column_index(child).unwrap();
            // Joint parent configuration as one mixed-radix category.
            let mut joint = vec![0usize; data.n_rows()];
            let mut levels = 1;
            for p in dag.parents_of(child).unwrap() {
                let pi = data.column_index(&p).unwrap();
                let k = data.spec(pi).cardinality();
                for (j, &v) in joint.iter_mut().zip(data.discrete(pi).unwrap()) {
                    *j = *j * k + v;
                }
                levels *= k;
            }
            let y = data.discrete(ci).unwrap();
            independence_p_value(&joint, levels, y, data.spec(ci).cardinality()) > 0.01
        });
        successes += usize::from(all_pass);
    }
    assert!(successes >= 9, "{successes}/10 seeds");
}

#[test]
fn true_coefficients_give_dependence() {
    let data = simulate(&GeneratorConfig::pedestrian_study(2500, 1)).unwrap();
    let col = |name: &str| data.discrete(data.column_index(name).unwrap()).unwrap().to_vec();
    assert!(independence_p_value(&col("age"), 4, &col("stress_level"), 2) < 1e-6);
}

#[test]
fn exogenous_marginals_match_configuration() {
    let n = 20_000;
    let gen = GeneratorConfig::pedestrian_study(n, 5);
    let data = simulate(&gen).unwrap();
    let (gen, _) = gen.validated().unwrap();
    for e in &gen.exogenous {
        let col = data.discrete(data.column_index(&e.name).unwrap()).unwrap();
        for (k, &p) in e.probs.iter().enumerate() {
            let freq = col.iter().filter(|&&c| c == k).count() as f64 / n as f64;
            let tol = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= tol, "{} level {k}: {freq} vs {p}", e.name);
        }
    }
}

#[test]
fn endogenous_shares_are_near_their_targets() {
    let data = simulate(&GeneratorConfig::pedestrian_study(40_000, 2)).unwrap();
    let share = |name: &str| {
        let c = data.discrete(data.column_index(name).unwrap()).unwrap();
        c.iter().filter(|&&x| x == 1).count() as f64 / c.len() as f64
    };
    assert!((share("stress_level") - 0.252).abs() < 0.01);
    assert!((share("wait_time") - 0.357).abs() < 0.01);
}

#[test]
fn csv_round_trip_preserves_values() {
    let gen = GeneratorConfig::pedestrian_study(300, 8);
    let data = simulate(&gen).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let (back, report) = read_csv(buf.as_slice(), &gen.specs()).unwrap();
    assert_eq!(report.rows_dropped, 0);
    for c in 0..data.n_cols() {
        assert_eq!(back.column(c), data.column(c));
    }
}

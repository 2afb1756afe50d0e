//! One PASS/FAIL line per acceptance criterion. With `ACCEPTANCE_STRICT=1`
//! the process exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use causal_choice::counterfactual::{
    abduct_all, fit_fvae, flow_forward, intervene, predict_counterfactual, Abduction, FlowConfig, FlowVae,
    InterventionSpec, PlanarLayer,
};
use causal_choice::data::{jenks_breaks, simulate, split, Dataset, GeneratorConfig};
use causal_choice::discovery::{cpdag_of, greedy_search, shd, SearchConfig};
use causal_choice::graph::{BlockingSet, CausalDag};
use causal_choice::scm::{aic, fit, loss_and_gradient, FitConfig, Mechanism, MechanismKind, ParentInfo, ParentValue, Scm};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const TRUE_STRESS_EFFECT: f64 = 0.600;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("collider-bias study", Duration::from_secs(300), collider_bias),
        ("AIC identity", Duration::from_secs(5), aic_identity),
        ("zero-residual reduction to MNL", Duration::from_secs(10), mnl_reduction),
        ("gradient suite", Duration::from_secs(60), gradient_suite),
        ("planar flow log-determinant", Duration::from_secs(30), flow_logdet),
        ("d-separation oracle equivalence", Duration::from_secs(60), dsep_oracle),
        ("discovery recovery", Duration::from_secs(300), discovery_recovery),
        ("counterfactual consistency", Duration::from_secs(30), counterfactual_consistency),
        ("counterfactual sign check", Duration::from_secs(30), counterfactual_sign),
        ("Jenks oracle", Duration::from_secs(30), jenks_oracle),
        ("CLI determinism", Duration::from_secs(300), cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let elapsed = t.elapsed();
        let pass = o.pass && elapsed <= *limit;
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {name}: {} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}

// 1 ---------------------------------------------------------------------

fn wait_dag(gen: &GeneratorConfig, with_collider: bool) -> CausalDag {
    let mut edges = vec![("stress_level", "wait_time"), ("age", "wait_time"), ("gender", "wait_time")];
    if with_collider {
        edges.push(("density_perception", "wait_time"));
    }
    CausalDag::from_edges(&gen.variable_names(), &edges).unwrap()
}

fn stress_estimate(gen: &GeneratorConfig, data: &Dataset, with_collider: bool, seed: u64) -> f64 {
    let cfg = FitConfig {
        layers: 0,
        learning_rate: 0.001,
        max_epochs: 300,
        patience: 20,
        seed,
        ..FitConfig::default()
    };
    let scm = Scm::build(&wait_dag(gen, with_collider), &gen.specs(), Some("wait_time"), &cfg).unwrap();
    let out = fit(&scm, data, data, &cfg).unwrap();
    let m = out.scm.mechanism("wait_time").unwrap();
    m.beta(m.k() - 1, m.feature_index("stress_level", Some(1)).unwrap())
}

/// Logistic-regression MLE by Newton's method on the same dummy design;
/// a binary ordered logit is a logit with the threshold as intercept.
fn newton_logit(gen: &GeneratorConfig, data: &Dataset, with_collider: bool) -> f64 {
    let mut parents = vec!["stress_level", "age", "gender"];
    if with_collider {
        parents.push("density_perception");
    }
    let specs = gen.specs();
    let y = data.discrete(data.column_index("wait_time").unwrap()).unwrap();
    let mut xs: Vec<Vec<f64>> = vec![vec![1.0]; data.n_rows()];
    for p in &parents {
        let c = data.column_index(p).unwrap();
        let k = specs.iter().find(|s| s.name == *p).unwrap().cardinality();
        let col = data.discrete(c).unwrap();
        for (row, &v) in xs.iter_mut().zip(col) {
            for level in 1..k {
                row.push(f64::from(u8::from(v == level)));
            }
        }
    }
    let d = xs[0].len();
    let mut b = vec![0.0; d];
    for _ in 0..50 {
        let mut g = vec![0.0; d];
        let mut h = vec![vec![0.0; d]; d];
        for (x, &yi) in xs.iter().zip(y) {
            let z: f64 = x.iter().zip(&b).map(|(a, c)| a * c).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            for i in 0..d {
                g[i] += (yi as f64 - p) * x[i];
                for j in 0..d {
                    h[i][j] += p * (1.0 - p) * x[i] * x[j];
                }
            }
        }
        let step = solve(h, g);
        for (bi, s) in b.iter_mut().zip(&step) {
            *bi += s;
        }
        if step.iter().all(|s| s.abs() < 1e-12) {
            break;
        }
    }
    b[1]
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn collider_bias() -> Outcome {
    let seeds = 20;
    let mut closer = 0;
    let (mut sum_a, mut sum_b, mut mle_a, mut mle_b, mut mle_closer) = (0.0, 0.0, 0.0, 0.0, 0);
    for seed in 0..seeds {
        let gen = GeneratorConfig::pedestrian_study(2500, seed);
        let data = simulate(&gen).unwrap();
        let a = stress_estimate(&gen, &data, true, seed);
        let b = stress_estimate(&gen, &data, false, seed);
        closer += usize::from((b - TRUE_STRESS_EFFECT).abs() < (a - TRUE_STRESS_EFFECT).abs());
        sum_a += a;
        sum_b += b;
        let (na, nb) = (newton_logit(&gen, &data, true), newton_logit(&gen, &data, false));
        mle_a += na;
        mle_b += nb;
        mle_closer += usize::from((nb - TRUE_STRESS_EFFECT).abs() < (na - TRUE_STRESS_EFFECT).abs());
    }
    let n = seeds as f64;
    let mean_b = sum_b / n;
    let pass = closer >= 18 && (mean_b - TRUE_STRESS_EFFECT).abs() <= 0.15;
    outcome(
        pass,
        format!(
            "causal spec closer in {closer}/20 seeds (need 18); mean estimate with collider {:.3}, without {:.3} (need 0.600 ± 0.15); Newton MLE oracle: {:.3} / {:.3}, closer in {mle_closer}/20",
            sum_a / n,
            mean_b,
            mle_a / n,
            mle_b / n
        ),
    )
}

// 2 ---------------------------------------------------------------------

fn aic_identity() -> Outcome {
    let pins = (aic(-1342.01, 300) - 3284.02).abs() < 1e-9 && (aic(-70701.37, 26) - 141454.74).abs() < 1e-9;
    let mut exact = true;
    for seed in 0..5 {
        let scm = random_toy_scm(2, seed, 0.5);
        let data = random_data(&toy_specs(), 50, seed);
        let ll = scm.joint_log_likelihood(&data).unwrap().total;
        exact &= scm.aic(&data).unwrap() == -2.0 * ll + 2.0 * scm.n_params() as f64;
    }
    outcome(pins && exact, format!("reference pins {}, model AIC exact {}", ok(pins), ok(exact)))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "mismatch"
    }
}

// 3 ---------------------------------------------------------------------

fn mnl_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=5);
        let layers = rng.random_range(0..=4);
        let n_par = rng.random_range(0..=3);
        let mut parents = Vec::new();
        let mut values = Vec::new();
        for j in 0..n_par {
            if rng.random_bool(0.5) {
                let card = rng.random_range(2..=4);
                let labels: Vec<String> = (0..card).map(|c| format!("l{c}")).collect();
                let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
                parents.push(ParentInfo::discrete(&format!("p{j}"), &refs));
                values.push(ParentValue::Category(rng.random_range(0..card)));
            } else {
                parents.push(ParentInfo::continuous(&format!("p{j}")));
                values.push(ParentValue::Real(rng.sample::<f64, _>(StandardNormal) * 2.0));
            }
        }
        let labels: Vec<String> = (0..k).map(|c| format!("a{c}")).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let mut m = Mechanism::new("y", &refs, MechanismKind::Categorical, parents, layers).unwrap();
        let f = m.features().len();
        let p: Vec<f64> = m
            .params()
            .iter()
            .zip(m.trainable())
            .enumerate()
            .map(|(i, (&v, &t))| if t && i < k * f { rng.random_range(-3.0..3.0) } else { v })
            .collect();
        m.set_params(&p).unwrap();
        let x = m.encode(&values).unwrap();
        let beta: Vec<Vec<f64>> = (0..k).map(|a| (0..f).map(|j| m.beta(a, j)).collect()).collect();
        if m.choice_probabilities(&values).unwrap() != plain_mnl(&beta, &x) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/1000 inputs differ bitwise"))
}

// 4 ---------------------------------------------------------------------

fn gradient_suite() -> Outcome {
    let mut worst_scm: f64 = 0.0;
    let mut worst_elbo: f64 = 0.0;
    let flow_cfg = FlowConfig {
        hidden_width: 5,
        flows: 2,
        ..FlowConfig::default()
    };
    for seed in 0..5u64 {
        let data = random_data(&toy_specs(), 15, 50 + seed);
        let base = random_toy_scm(2, seed, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let free = base.flat_trainable();
        for _ in 0..10 {
            let mut scm = base.clone();
            let flat: Vec<f64> = base
                .flat_params()
                .iter()
                .zip(&free)
                .map(|(&v, &f)| if f { rng.random_range(-1.0..1.0) } else { v })
                .collect();
            scm.set_flat_params(&flat).unwrap();
            let (_, g) = loss_and_gradient(&scm, &data).unwrap();
            let loss = |p: &[f64]| {
                let mut s = scm.clone();
                s.set_flat_params(p).unwrap();
                -s.joint_log_likelihood(&data).unwrap().total / data.n_rows() as f64
            };
            for i in (0..flat.len()).filter(|&i| free[i]) {
                worst_scm = worst_scm.max(relative_error(g[i], central_difference(loss, &flat, i, 1e-5)));
            }
            for m in scm.mechanisms() {
                let mut vae = FlowVae::new(m, &flow_cfg).unwrap();
                let p: Vec<f64> = vae.params().iter().map(|_| rng.random_range(-0.5..0.5)).collect();
                vae.set_params(&p).unwrap();
                let rows = vae.parent_rows(&data).unwrap();
                let noise: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|_| (0..vae.latent_dim()).map(|_| rng.sample(StandardNormal)).collect())
                    .collect();
                let (_, g) = vae.elbo_gradient(&rows, &noise).unwrap();
                let f = |q: &[f64]| {
                    let mut v = vae.clone();
                    v.set_params(q).unwrap();
                    v.elbo_loss(&rows, &noise).unwrap()
                };
                for i in 0..p.len() {
                    worst_elbo = worst_elbo.max(relative_error(g[i], central_difference(f, &p, i, 1e-5)));
                }
            }
        }
    }
    outcome(
        worst_scm < 1e-4 && worst_elbo < 1e-4,
        format!("max relative error: joint loss {worst_scm:.2e}, ELBO {worst_elbo:.2e} (limit 1e-4)"),
    )
}

// 5 ---------------------------------------------------------------------

fn flow_logdet() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=4);
        let layers = rng.random_range(1..=5);
        let mut normal = |s: f64| -> Vec<f64> { (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * s).collect() };
        let flows: Vec<PlanarLayer> = (0..layers)
            .map(|_| PlanarLayer::new(normal(1.0), normal(1.0), normal(1.0)[0]).unwrap())
            .collect();
        let g0 = normal(1.0);
        let (_, ld) = flow_forward(&flows, &g0).unwrap();
        let h = 1e-6;
        let mut jac = vec![vec![0.0; d]; d];
        for j in 0..d {
            let mut a = g0.clone();
            let mut b = g0.clone();
            a[j] += h;
            b[j] -= h;
            let (fa, _) = flow_forward(&flows, &a).unwrap();
            let (fb, _) = flow_forward(&flows, &b).unwrap();
            for i in 0..d {
                jac[i][j] = (fa[i] - fb[i]) / (2.0 * h);
            }
        }
        worst = worst.max((ld - log_abs_det(jac)).abs());
    }
    let mut identity_exact = true;
    for _ in 0..50 {
        let d = rng.random_range(1..=4);
        let flows: Vec<PlanarLayer> = (0..rng.random_range(1..=5))
            .map(|_| {
                let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                PlanarLayer::new(vec![0.0; d], w, rng.sample(StandardNormal)).unwrap()
            })
            .collect();
        let g0: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let (g, ld) = flow_forward(&flows, &g0).unwrap();
        identity_exact &= g == g0 && ld == 0.0;
    }
    outcome(
        worst <= 1e-5 && identity_exact,
        format!("max |log-det error| {worst:.2e} over 200 stacks (limit 1e-5); identity stacks exact: {}", ok(identity_exact)),
    )
}

// 6 ---------------------------------------------------------------------

/// Every simple path between `x` and `y` in the skeleton, checked against
/// the chain, fork and collider rules.
fn separated_by_enumeration(dag: &CausalDag, x: usize, y: usize, z: &BTreeSet<usize>) -> bool {
    fn walk(dag: &CausalDag, path: &mut Vec<usize>, y: usize, z: &BTreeSet<usize>) -> bool {
        let last = *path.last().unwrap();
        if last == y {
            return !open(dag, path, z);
        }
        for n in 0..dag.len() {
            if dag.adjacent(last, n) && !path.contains(&n) {
                path.push(n);
                let blocked = walk(dag, path, y, z);
                path.pop();
                if !blocked {
                    return false;
                }
            }
        }
        true
    }
    fn open(dag: &CausalDag, path: &[usize], z: &BTreeSet<usize>) -> bool {
        path.windows(3).all(|t| {
            let (a, m, b) = (t[0], t[1], t[2]);
            let collider = dag.has_edge(a, m) && dag.has_edge(b, m);
            if collider {
                z.contains(&m) || dag.descendants(m).iter().any(|d| z.contains(d))
            } else {
                !z.contains(&m)
            }
        })
    }
    walk(dag, &mut vec![x], y, z)
}

fn dsep_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut queries, mut bad_dispatch, mut bad_ball) = (0usize, 0usize, 0usize);
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let mut dag = CausalDag::new(&names).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let density = rng.random_range(0.1..0.7);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(density) {
                    dag.add_edge(order[i], order[j]).unwrap();
                }
            }
        }
        for x in 0..n {
            for y in x + 1..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                for mask in 0u32..(1 << rest.len()) {
                    let z: BTreeSet<usize> =
                        rest.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &v)| v).collect();
                    let expect = separated_by_enumeration(&dag, x, y, &z);
                    let bs = BlockingSet::new(z.iter().copied());
                    bad_dispatch += usize::from(dag.d_separated(x, y, &bs).unwrap() != expect);
                    bad_ball += usize::from(dag.d_separated_by_reachability(x, y, &bs).unwrap() != expect);
                    queries += 1;
                }
            }
        }
    }
    outcome(
        bad_dispatch == 0 && bad_ball == 0,
        format!("{queries} queries; disagreements: default {bad_dispatch}, reachability {bad_ball}"),
    )
}

// 7 ---------------------------------------------------------------------

fn discovery_recovery() -> Outcome {
    let mut hits = 0;
    let mut dists = Vec::new();
    for seed in 0..10 {
        let gen = GeneratorConfig::pedestrian_study(10_000, seed);
        let data = simulate(&gen).unwrap();
        let (dag, _) = greedy_search(&data, &gen.knowledge(), &SearchConfig::default()).unwrap();
        let d = shd(&cpdag_of(&dag), &cpdag_of(&gen.dag().unwrap())).unwrap();
        hits += usize::from(d <= 1);
        dists.push(d);
    }
    outcome(hits >= 8, format!("SHD ≤ 1 in {hits}/10 seeds (need 8); SHDs {dists:?}"))
}

// 8 ---------------------------------------------------------------------

fn trained_vaes(scm: &Scm, data: &Dataset, seed: u64) -> Vec<FlowVae> {
    let cfg = FlowConfig {
        max_epochs: 5,
        seed,
        ..FlowConfig::default()
    };
    let (train, val) = split(data, 0.7, seed).unwrap();
    scm.mechanisms()
        .iter()
        .filter(|m| !matches!(m.kind(), MechanismKind::Constant { .. }))
        .map(|m| fit_fvae(&FlowVae::new(m, &cfg).unwrap(), &train, &val, &cfg).unwrap().vae)
        .collect()
}

fn counterfactual_consistency() -> Outcome {
    let gen = GeneratorConfig::pedestrian_study(1000, 8);
    let data = simulate(&gen).unwrap();
    let scm = Scm::from_generator(&gen).unwrap();
    let eps = abduct_all(&scm, &trained_vaes(&scm, &data, 8), &data).unwrap();
    let factual = predict_counterfactual(&scm, &eps, &data).unwrap();
    let (mut identity_ok, mut hard_ok, mut modular_ok) = (true, true, true);
    for m in scm.mechanisms() {
        let same = intervene(&scm, &InterventionSpec::soft(m.clone())).unwrap();
        identity_ok &= predict_counterfactual(&same, &eps, &data).unwrap().categories == factual.categories;
        for a in 0..m.k() {
            let int = intervene(&scm, &InterventionSpec::hard(m.child(), a)).unwrap();
            let cf = predict_counterfactual(&int, &eps, &data).unwrap();
            hard_ok &= cf.categories_of(m.child()).unwrap().iter().all(|&c| c == a);
            for other in scm.mechanisms().iter().filter(|o| o.child() != m.child()) {
                modular_ok &= int.mechanism(other.child()).unwrap().to_bytes() == other.to_bytes();
            }
        }
    }
    outcome(
        identity_ok && hard_ok && modular_ok,
        format!(
            "identity reproduces factual {}, do(x=a) sets x {}, other mechanisms byte-identical {}",
            ok(identity_ok),
            ok(hard_ok),
            ok(modular_ok)
        ),
    )
}

// 9 ---------------------------------------------------------------------

fn counterfactual_sign() -> Outcome {
    let gen = GeneratorConfig::pedestrian_study(2500, 9);
    let data = simulate(&gen).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    let fitted = {
        let cfg = FitConfig {
            max_epochs: 30,
            seed: 9,
            ..FitConfig::default()
        };
        let (train, val) = split(&data, 0.7, 9).unwrap();
        let scm = Scm::build(&gen.dag().unwrap(), &gen.specs(), None, &cfg).unwrap();
        fit(&scm, &train, &val, &cfg).unwrap().scm
    };
    for (label, scm) in [("generator", Scm::from_generator(&gen).unwrap()), ("fitted", fitted)] {
        let ab = Abduction::new(scm.clone(), trained_vaes(&scm, &data, 9), &data).unwrap();
        let spec = InterventionSpec::parse_hard("stress_level=low", &scm).unwrap();
        let r = ab.query(&spec, "wait_time", &data).unwrap();
        let increased = r.transitions[0][1];
        pass &= increased == 0 && r.share_deltas[1] <= 0.0;
        lines.push(format!("{label} model: {increased} rows raised, high-wait share delta {:+.4}", r.share_deltas[1]));
    }
    outcome(pass, lines.join("; "))
}

// 10 --------------------------------------------------------------------

fn sse(classes: &[Vec<f64>]) -> f64 {
    classes
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum()
}

/// All ways to cut the distinct sorted values into `k` runs; returns the
/// best SSE, its breaks, and whether another cut comes within `1e-9`.
fn jenks_brute(values: &[f64], k: usize) -> (f64, Vec<f64>, bool) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let m = distinct.len();
    let mut best = (f64::INFINITY, Vec::new());
    let mut costs = Vec::new();
    let mut cuts = vec![0usize; k - 1];
    fn rec(
        pos: usize,
        from: usize,
        m: usize,
        cuts: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if pos == cuts.len() {
            visit(cuts);
            return;
        }
        for c in from..m {
            cuts[pos] = c;
            rec(pos + 1, c + 1, m, cuts, visit);
        }
    }
    let mut visit = |cuts: &[usize]| {
        // cut c: classes end at distinct[c - 1]
        let mut bounds = vec![f64::NEG_INFINITY];
        bounds.extend(cuts.iter().map(|&c| distinct[c - 1]));
        bounds.push(f64::INFINITY);
        let classes: Vec<Vec<f64>> = bounds
            .windows(2)
            .map(|w| sorted.iter().copied().filter(|&x| x > w[0] && x <= w[1]).collect())
            .collect();
        let s = sse(&classes);
        costs.push(s);
        if s < best.0 {
            best = (s, bounds[1..bounds.len() - 1].to_vec());
        }
    };
    rec(0, 1, m, &mut cuts, &mut visit);
    let near = costs.iter().filter(|&&c| c <= best.0 + 1e-9 * best.0.max(1.0)).count();
    (best.0, best.1, near > 1)
}

fn jenks_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut cases, mut bad) = (0, 0);
    while cases < 500 {
        let n = rng.random_range(2..=30);
        let k = rng.random_range(2..=4);
        let values: Vec<f64> = if rng.random_bool(0.3) {
            (0..n).map(|_| rng.random_range(0..8) as f64).collect()
        } else {
            (0..n).map(|_| rng.random_range(-50.0..50.0)).collect()
        };
        let mut d = values.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        if d.len() < k {
            assert!(jenks_breaks(&values, k).is_err());
            continue;
        }
        cases += 1;
        let breaks = jenks_breaks(&values, k).unwrap();
        let (best, best_breaks, tied) = jenks_brute(&values, k);
        let mut bounds = vec![f64::NEG_INFINITY];
        bounds.extend(&breaks);
        bounds.push(f64::INFINITY);
        let classes: Vec<Vec<f64>> = bounds
            .windows(2)
            .map(|w| values.iter().copied().filter(|&x| x > w[0] && x <= w[1]).collect())
            .collect();
        let got = sse(&classes);
        let sse_ok = (got - best).abs() <= 1e-9 * best.max(1.0);
        let breaks_ok = tied || breaks == best_breaks;
        bad += usize::from(!(sse_ok && breaks_ok));
    }
    outcome(bad == 0, format!("{bad}/500 cases differ from exhaustive search"))
}

// 11 --------------------------------------------------------------------

fn run_cli(args: &[String]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_causal-choice"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let t = tempfile::tempdir().unwrap();
    let root = t.path();
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let sim = root.join("sim");
    let common = |sub: &str| -> Vec<String> {
        vec![
            sub.into(),
            "--seed".into(),
            "11".into(),
            "--data".into(),
            s(&sim.join("data.csv")),
            "--specs".into(),
            s(&sim.join("specs.toml")),
        ]
    };
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["simulate".into(), "--seed".into(), "11".into(), "--rows".into(), "1500".into()]),
        ("discover", [common("discover"), vec!["--knowledge".into(), s(&sim.join("knowledge.txt"))]].concat()),
        ("fit", [common("fit"), vec!["--dag".into(), s(&sim.join("dag.txt")), "--epochs".into(), "10".into()]].concat()),
        (
            "search",
            [
                common("search"),
                vec![
                    "--dag".into(),
                    s(&sim.join("dag.txt")),
                    "--outcome".into(),
                    "wait_time".into(),
                    "--trials".into(),
                    "3".into(),
                    "--epochs".into(),
                    "5".into(),
                ],
            ]
            .concat(),
        ),
        (
            "counterfactual",
            [
                common("counterfactual"),
                vec![
                    "--model".into(),
                    s(&root.join("fit-a/model.cctf")),
                    "--outcome".into(),
                    "wait_time".into(),
                    "--intervene".into(),
                    "stress_level=low".into(),
                    "--epochs".into(),
                    "5".into(),
                ],
            ]
            .concat(),
        ),
    ];
    let mut report = Vec::new();
    let mut pass = true;
    for (name, args) in &commands {
        let dirs = [root.join(format!("{name}-a")), root.join(format!("{name}-b"))];
        let mut ran = true;
        for d in &dirs {
            ran &= run_cli(&[args.clone(), vec!["--out".into(), s(d)]].concat());
        }
        if *name == "simulate" && ran {
            fs::rename(&dirs[0], &sim).unwrap();
            fs::rename(&dirs[1], &dirs[0]).unwrap();
            let again = root.join("simulate-b");
            ran &= run_cli(&[args.clone(), vec!["--out".into(), s(&again)]].concat());
            let same = ran && files(&sim) == files(&again);
            pass &= same;
            report.push(format!("{name} {}", if same { "identical" } else { "DIFFERENT" }));
            continue;
        }
        let same = ran && files(&dirs[0]) == files(&dirs[1]);
        pass &= same;
        report.push(format!("{name} {}", if !ran { "FAILED TO RUN" } else if same { "identical" } else { "DIFFERENT" }));
    }
    outcome(pass, report.join(", "))
}

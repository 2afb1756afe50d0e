use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Column, Dataset};
use super::spec::VariableSpec;
use crate::error::{Error, Result};
use crate::graph::{CausalDag, Knowledge};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSpec {
    pub name: String,
    pub labels: Vec<String>,
    /// Category probabilities; renormalised when they miss 1 by rounding.
    pub probs: Vec<f64>,
}

/// One dummy-coded term `value · 𝟙(parent = level)` of a latent index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub parent: String,
    pub level: String,
    pub value: f64,
}

/// `latent = Σ coefficients + Logistic(0, 1)`; category = number of
/// thresholds strictly below the latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedLogitSpec {
    pub name: String,
    pub labels: Vec<String>,
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub coefficients: Vec<Coefficient>,
}

/// Ground-truth generator for synthetic studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub exogenous: Vec<ExogenousSpec>,
    #[serde(default)]
    pub endogenous: Vec<OrderedLogitSpec>,
}

const PROB_SLACK: f64 = 0.01;

impl GeneratorConfig {
    /// The five-variable pedestrian crossing study: socio-demographics drive
    /// stress and wait time, stress drives wait time (true effect 0.600), and
    /// density perception is a common effect of stress and wait time.
    ///
    /// Thresholds were fixed by quantile inversion on 4·10⁶ draws so that
    /// 25.2 % report high stress, 35.7 % a high wait time and half a dense
    /// road.
    pub fn pedestrian_study(n: usize, seed: u64) -> Self {
        let ex = |name: &str, labels: &[&str], probs: &[f64]| ExogenousSpec {
            name: name.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            probs: probs.to_vec(),
        };
        let c = |parent: &str, level: &str, value: f64| Coefficient {
            parent: parent.into(),
            level: level.into(),
            value,
        };
        let ord = |name: &str, thresholds: &[f64], coefficients: Vec<Coefficient>| OrderedLogitSpec {
            name: name.into(),
            labels: vec!["low".into(), "high".into()],
            thresholds: thresholds.to_vec(),
            coefficients,
        };
        Self {
            n,
            seed,
            exogenous: vec![
                ex("gender", &["male", "female"], &[0.618, 0.382]),
                ex("age", &["18-25", "25-39", "40-49", "50+"], &[0.542, 0.339, 0.034, 0.084]),
                ex("cars", &["none", "one", "more"], &[0.302, 0.345, 0.353]),
            ],
            endogenous: vec![
                ord(
                    "stress_level",
                    &[1.687],
                    vec![
                        c("gender", "female", 0.500),
                        c("age", "25-39", 0.561),
                        c("age", "40-49", 2.911),
                        c("age", "50+", 1.975),
                        c("cars", "one", -0.300),
                        c("cars", "more", -0.132),
                    ],
                ),
                ord(
                    "wait_time",
                    &[0.322],
                    vec![
                        c("gender", "female", 0.603),
                        c("age", "25-39", -1.410),
                        c("age", "40-49", -1.854),
                        c("age", "50+", -2.854),
                        c("stress_level", "high", 0.600),
                    ],
                ),
                ord(
                    "density_perception",
                    &[-0.155],
                    vec![
                        c("stress_level", "high", 0.500),
                        c("wait_time", "high", -0.800),
                    ],
                ),
            ],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("generator config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator config serialises")
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.exogenous
            .iter()
            .map(|e| e.name.clone())
            .chain(self.endogenous.iter().map(|e| e.name.clone()))
            .collect()
    }

    /// The data-generating DAG implied by the coefficient lists.
    pub fn dag(&self) -> Result<CausalDag> {
        let mut dag = CausalDag::new(&self.variable_names())?;
        for e in &self.endogenous {
            for c in &e.coefficients {
                dag.add_edge_by_name(&c.parent, &e.name)
                    .map_err(|err| Error::Config(format!("generator graph: {err}")))?;
            }
        }
        Ok(dag)
    }

    /// Exogenous variables may not receive parents.
    pub fn knowledge(&self) -> Knowledge {
        let names: Vec<&str> = self.exogenous.iter().map(|e| e.name.as_str()).collect();
        Knowledge::new().exogenous(&names)
    }

    pub fn specs(&self) -> Vec<VariableSpec> {
        self.exogenous
            .iter()
            .map(|e| VariableSpec::categorical(&e.name, &str_refs(&e.labels)).exogenous())
            .chain(
                self.endogenous
                    .iter()
                    .map(|e| VariableSpec::ordinal(&e.name, &str_refs(&e.labels))),
            )
            .collect()
    }

    /// Checked copy with exogenous probabilities renormalised.
    pub fn validated(&self) -> Result<(Self, Vec<String>)> {
        let mut cfg = self.clone();
        let mut notes = Vec::new();
        for e in &mut cfg.exogenous {
            if e.labels.len() < 2 || e.labels.len() != e.probs.len() {
                return Err(Error::Config(format!(
                    "`{}`: need ≥ 2 labels and one probability per label",
                    e.name
                )));
            }
            if e.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config(format!("`{}`: probabilities must lie in [0, 1]", e.name)));
            }
            let total: f64 = e.probs.iter().sum();
            if (total - 1.0).abs() > PROB_SLACK {
                return Err(Error::Config(format!(
                    "`{}`: probabilities sum to {total}, not 1",
                    e.name
                )));
            }
            if total != 1.0 {
                notes.push(format!("{} probabilities renormalised from total {total}", e.name));
                for p in &mut e.probs {
                    *p /= total;
                }
            }
        }
        for e in &cfg.endogenous {
            if e.labels.len() != e.thresholds.len() + 1 {
                return Err(Error::Config(format!(
                    "`{}`: {} labels need {} thresholds",
                    e.name,
                    e.labels.len(),
                    e.labels.len().saturating_sub(1)
                )));
            }
            if e.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(format!("`{}`: thresholds must increase", e.name)));
            }
            if e.coefficients.iter().any(|c| !c.value.is_finite())
                || e.thresholds.iter().any(|t| !t.is_finite())
            {
                return Err(Error::Config(format!("`{}`: non-finite parameter", e.name)));
            }
        }
        cfg.dag()?;
        let labels: BTreeMap<&str, &[String]> = cfg
            .exogenous
            .iter()
            .map(|e| (e.name.as_str(), e.labels.as_slice()))
            .chain(cfg.endogenous.iter().map(|e| (e.name.as_str(), e.labels.as_slice())))
            .collect();
        for e in &cfg.endogenous {
            for c in &e.coefficients {
                let known = labels.get(c.parent.as_str()).is_some_and(|l| l.contains(&c.level));
                if !known {
                    return Err(Error::Config(format!(
                        "`{}`: parent `{}` has no level `{}`",
                        e.name, c.parent, c.level
                    )));
                }
            }
        }
        Ok((cfg, notes))
    }
}

fn str_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn draw_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn draw_logistic(rng: &mut impl Rng) -> f64 {
    // open interval keeps the logit finite
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    (u / (1.0 - u)).ln()
}

/// Draw `cfg.n` rows from the generator; a pure function of the config.
pub fn simulate(cfg: &GeneratorConfig) -> Result<Dataset> {
    let (cfg, notes) = cfg.validated()?;
    let dag = cfg.dag()?;
    let specs = cfg.specs();
    let n_ex = cfg.exogenous.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cols: Vec<Vec<usize>> = vec![Vec::with_capacity(cfg.n); specs.len()];

    // Resolve coefficients to (column, level) once.
    let terms: Vec<Vec<(usize, usize, f64)>> = cfg
        .endogenous
        .iter()
        .map(|e| {
            e.coefficients
                .iter()
                .map(|c| {
                    let col = dag.index_of(&c.parent).expect("validated");
                    let level = specs[col].category_of(&c.level).expect("validated");
                    (col, level, c.value)
                })
                .collect()
        })
        .collect();
    let order: Vec<usize> = dag.topological_order().into_iter().filter(|&v| v >= n_ex).collect();

    for _ in 0..cfg.n {
        let mut row = vec![0usize; specs.len()];
        for (j, e) in cfg.exogenous.iter().enumerate() {
            row[j] = draw_categorical(&mut rng, &e.probs);
        }
        for &v in &order {
            let e = &cfg.endogenous[v - n_ex];
            let mut latent = draw_logistic(&mut rng);
            for &(col, level, beta) in &terms[v - n_ex] {
                if row[col] == level {
                    latent += beta;
                }
            }
            row[v] = e.thresholds.partition_point(|&t| t < latent);
        }
        for (c, x) in cols.iter_mut().zip(row) {
            c.push(x);
        }
    }
    let mut data = Dataset::new(specs, cols.into_iter().map(Column::Discrete).collect())?;
    data.provenance.push(format!("simulated: n = {}, seed = {}", cfg.n, cfg.seed));
    data.provenance.extend(notes);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pedestrian_study_structure() {
        let cfg = GeneratorConfig::pedestrian_study(2500, 1);
        let dag = cfg.dag().unwrap();
        let wait: Vec<String> = dag.parents_of("wait_time").unwrap().into_iter().collect();
        assert_eq!(wait, vec!["age", "gender", "stress_level"]);
        let dens: Vec<String> = dag.parents_of("density_perception").unwrap().into_iter().collect();
        assert_eq!(dens, vec!["stress_level", "wait_time"]);
        let stress = &cfg.endogenous[0];
        assert_eq!(stress.coefficients[0].value, 0.500);
        let stress_on_wait = cfg.endogenous[1]
            .coefficients
            .iter()
            .find(|c| c.parent == "stress_level")
            .unwrap();
        assert_eq!(stress_on_wait.value, 0.600);
        assert_eq!(cfg.endogenous[2].coefficients[1].value, -0.800);
        assert_eq!(cfg.exogenous[0].probs[1], 0.382);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = GeneratorConfig::pedestrian_study(100, 9);
        assert_eq!(GeneratorConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn seeded_and_sized() {
        let cfg = GeneratorConfig::pedestrian_study(300, 4);
        let a = simulate(&cfg).unwrap();
        assert_eq!(a.n_rows(), 300);
        assert_eq!(a, simulate(&cfg).unwrap());
        let b = simulate(&GeneratorConfig { seed: 5, ..cfg }).unwrap();
        assert_ne!(a.column(3), b.column(3));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = GeneratorConfig::pedestrian_study(10, 1);
        cfg.exogenous[0].probs = vec![0.5, 0.2];
        assert!(simulate(&cfg).is_err());
        let mut cfg = GeneratorConfig::pedestrian_study(10, 1);
        cfg.endogenous[0].coefficients[0].level = "other".into();
        assert!(simulate(&cfg).is_err());
        let mut cfg = GeneratorConfig::pedestrian_study(10, 1);
        cfg.endogenous[0].coefficients.push(Coefficient {
            parent: "density_perception".into(),
            level: "high".into(),
            value: 1.0,
        });
        assert!(simulate(&cfg).is_err());
    }
}

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Prepared;
use crate::error::{Error, Result};
use crate::scm::{fit, FitConfig, FitOutcome, Scm};

pub const LAYER_CHOICES: [usize; 5] = [2, 4, 8, 16, 32];
pub const LEARNING_RATES: [f64; 2] = [0.01, 0.001];
pub const BATCH_SIZES: [usize; 2] = [32, 64];
pub const THRESHOLD_RANGE: (f64, f64) = (0.3, 0.6);

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub config: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSearchPlan {
    pub master_seed: u64,
    pub trials: Vec<Trial>,
}

/// `n` configurations drawn uniformly from the hyperparameter grid, each
/// with its own seed derived from `master_seed`. Fields outside the grid
/// (epochs, patience, init scale) come from `base`.
pub fn sample_plan(base: &FitConfig, n: usize, master_seed: u64) -> Result<RandomSearchPlan> {
    if n == 0 {
        return Err(Error::Config("random search needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut seen = BTreeSet::new();
    let mut trials = Vec::with_capacity(n);
    for index in 0..n {
        let mut seed = rng.random::<u64>();
        while !seen.insert(seed) {
            seed = rng.random::<u64>();
        }
        let t = rng.random_range(THRESHOLD_RANGE.0..=THRESHOLD_RANGE.1);
        let config = FitConfig {
            layers: LAYER_CHOICES[rng.random_range(0..LAYER_CHOICES.len())],
            learning_rate: LEARNING_RATES[rng.random_range(0..LEARNING_RATES.len())],
            batch_size: BATCH_SIZES[rng.random_range(0..BATCH_SIZES.len())],
            threshold_range: (t, t),
            seed,
            ..base.clone()
        };
        trials.push(Trial { index, config });
    }
    Ok(RandomSearchPlan { master_seed, trials })
}

pub struct TrialResult {
    pub trial: Trial,
    pub outcome: Result<FitOutcome>,
}

impl TrialResult {
    fn val_loss(&self) -> f64 {
        self.outcome.as_ref().map_or(f64::INFINITY, |o| o.best().val_loss)
    }
}

/// Run every trial (concurrently) and return them sorted by validation
/// loss, diverged trials last, ties by trial index.
pub(crate) fn run_plan(plan: &RandomSearchPlan, p: &Prepared, outcome: Option<&str>) -> Result<Vec<TrialResult>> {
    let mut results: Vec<TrialResult> = plan
        .trials
        .par_iter()
        .map(|t| {
            let outcome = Scm::build(&p.dag, &p.specs, outcome, &t.config).and_then(|s| fit(&s, &p.train, &p.val, &t.config));
            TrialResult {
                trial: t.clone(),
                outcome,
            }
        })
        .collect();
    // Structural or configuration problems are not trial-specific.
    if let Some(e) = results.iter().find_map(|r| r.outcome.as_ref().err().filter(|e| !e.is_numeric())) {
        return Err(Error::Config(e.to_string()));
    }
    results.sort_by(|a, b| a.val_loss().total_cmp(&b.val_loss()).then(a.trial.index.cmp(&b.trial.index)));
    Ok(results)
}

pub(crate) fn leaderboard_csv(results: &[TrialResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "rank", "trial", "seed", "layers", "learning_rate", "batch_size", "threshold", "best_epoch",
        "validation_loss", "status",
    ])?;
    for (rank, r) in results.iter().enumerate() {
        let c = &r.trial.config;
        let (epoch, loss, status) = match &r.outcome {
            Ok(o) => (o.best_epoch.to_string(), o.best().val_loss.to_string(), "ok".to_string()),
            Err(e) => (String::new(), String::new(), format!("diverged: {e}")),
        };
        w.write_record([
            (rank + 1).to_string(),
            r.trial.index.to_string(),
            c.seed.to_string(),
            c.layers.to_string(),
            c.learning_rate.to_string(),
            c.batch_size.to_string(),
            c.threshold_range.0.to_string(),
            epoch,
            loss,
            status,
        ])?;
    }
    w.into_inner().map_err(|e| Error::io("leaderboard.csv", e.into_error()))
}

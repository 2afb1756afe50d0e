//! Command-line front end. Every command is a pure function of its inputs
//! and `--seed`; outputs land in `--out`.

mod config;
mod search;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::counterfactual::{fit_fvae, latent_samples, Abduction, FlowConfig, FlowVae, InterventionSpec};
use crate::data::{load_csv, simulate, split, Dataset, GeneratorConfig, SpecSet, VariableSpec};
use crate::discovery::{cpdag_of, greedy_search, SearchConfig};
use crate::error::{Error, Result};
use crate::graph::{CausalDag, Knowledge};
use crate::scm::{fit, FitConfig, FitOutcome, MechanismKind, Scm};

pub use config::RunFile;
pub use search::{sample_plan, RandomSearchPlan, Trial, TrialResult};

/// Share of rows used for training; the rest is validation.
pub const TRAIN_RATIO: f64 = 0.7;

#[derive(Debug, Parser)]
#[command(name = "causal-choice", version, about = "Causal discovery, deep choice SCMs and counterfactuals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a DAG from discrete data by greedy BIC search.
    Discover(DiscoverArgs),
    /// Fit a structural choice model on a DAG.
    Fit(FitArgs),
    /// Random hyperparameter search over fit settings.
    Search(SearchArgs),
    /// Train flow models, abduct residuals and answer an intervention.
    Counterfactual(CounterfactualArgs),
    /// Draw a synthetic dataset from an ordered-logit generator.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML file supplying any flag; the command line wins.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub specs: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dag: Option<PathBuf>,
    #[arg(long, global = true)]
    pub knowledge: Option<PathBuf>,
    #[arg(long, global = true)]
    pub outcome: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub max_parents: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Continuous parent to sweep for a substitution curve.
    #[arg(long)]
    pub curve: Option<String>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fitted model file written by `fit` or `search`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Hard intervention `variable=label`.
    #[arg(long)]
    pub intervene: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Generator TOML; the built-in pedestrian study when absent.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
}

/// Parse `args` (including the program name), run, and map the outcome to
/// an exit code: 0 success, 1 user or configuration error, 2 numeric failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Discover(a) => discover(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Search(a) => search_cmd(a),
        Command::Counterfactual(a) => counterfactual_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
    }
}

/// Flags after merging the config file under the command line.
struct Resolved {
    file: RunFile,
    data: Option<PathBuf>,
    specs: Option<PathBuf>,
    dag: Option<PathBuf>,
    knowledge: Option<PathBuf>,
    outcome: Option<String>,
    seed: u64,
    out: PathBuf,
}

impl Resolved {
    fn new(c: &Common) -> Result<Self> {
        let file = match &c.config {
            Some(p) => RunFile::load(p)?,
            None => RunFile::default(),
        };
        let seed = c
            .seed
            .or(file.seed)
            .ok_or_else(|| Error::Config("--seed is required".into()))?;
        let out = c
            .out
            .clone()
            .or_else(|| file.out.clone())
            .ok_or_else(|| Error::Config("--out is required".into()))?;
        Ok(Self {
            data: c.data.clone().or_else(|| file.data.clone()),
            specs: c.specs.clone().or_else(|| file.specs.clone()),
            dag: c.dag.clone().or_else(|| file.dag.clone()),
            knowledge: c.knowledge.clone().or_else(|| file.knowledge.clone()),
            outcome: c.outcome.clone().or_else(|| file.outcome.clone()),
            seed,
            out,
            file,
        })
    }

    fn need<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        let p = v.as_deref().ok_or_else(|| Error::Config(format!("--{flag} is required")))?;
        if !p.exists() {
            return Err(Error::Config(format!("--{flag}: `{}` does not exist", p.display())));
        }
        Ok(p)
    }

    fn load_specs(&self) -> Result<Vec<VariableSpec>> {
        Ok(SpecSet::load(Self::need(&self.specs, "specs")?)?.variable)
    }

    fn load_data(&self, specs: &[VariableSpec]) -> Result<Dataset> {
        let (data, report) = load_csv(Self::need(&self.data, "data")?, specs)?;
        if report.rows_dropped > 0 {
            eprintln!(
                "note: dropped {} of {} rows with missing values",
                report.rows_dropped, report.rows_read
            );
        }
        Ok(data)
    }

    fn load_dag(&self) -> Result<CausalDag> {
        let p = Self::need(&self.dag, "dag")?;
        CausalDag::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)
    }

    fn load_knowledge(&self) -> Result<Knowledge> {
        match &self.knowledge {
            None => Ok(Knowledge::default()),
            Some(_) => {
                let p = Self::need(&self.knowledge, "knowledge")?;
                Knowledge::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)
            }
        }
    }

    fn fit_config(&self) -> Result<FitConfig> {
        let mut cfg = self.file.fit.clone().unwrap_or_default();
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn flow_config(&self) -> Result<FlowConfig> {
        let mut cfg = self.file.flow.clone().unwrap_or_default();
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(&self.out)
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn discover(a: DiscoverArgs) -> Result<()> {
    let r = Resolved::new(&a.common)?;
    let specs = r.load_specs()?;
    let data = r.load_data(&specs)?;
    let knowledge = r.load_knowledge()?;
    let mut cfg = SearchConfig::default();
    if let Some(m) = a.max_parents.or(r.file.max_parents) {
        cfg.max_parents = m;
    }
    let (dag, trace) = greedy_search(&data, &knowledge, &cfg)?;
    knowledge.validate(&dag)?;
    let out = r.out_dir()?;
    write(&out.join("dag.txt"), dag.to_text())?;
    write(&out.join("trace.log"), trace.to_log())?;
    write(&out.join("pattern.txt"), cpdag_of(&dag).to_text())?;
    eprintln!("{} edges, BIC {:.4}", dag.edge_count(), trace.final_score);
    Ok(())
}

#[derive(Debug, Serialize)]
struct MechanismReport {
    mechanism: String,
    kind: &'static str,
    alternatives: usize,
    parameters: usize,
    train_log_likelihood: f64,
    validation_log_likelihood: f64,
    validation_mpe: f64,
}

#[derive(Debug, Serialize)]
pub(crate) struct FitReport {
    seed: u64,
    config: FitConfig,
    train_rows: usize,
    validation_rows: usize,
    parameters: usize,
    train_log_likelihood: f64,
    validation_log_likelihood: f64,
    aic: f64,
    clamped_probabilities: usize,
    best_epoch: usize,
    epochs_run: usize,
    stopped_early: bool,
    mechanisms: Vec<MechanismReport>,
}

pub(crate) fn fit_report(outcome: &FitOutcome, cfg: &FitConfig, train: &Dataset, val: &Dataset) -> Result<FitReport> {
    let scm = &outcome.scm;
    let tr = scm.joint_log_likelihood(train)?;
    let va = scm.joint_log_likelihood(val)?;
    let mpe = scm.mpe(val)?;
    let mechanisms = scm
        .mechanisms()
        .iter()
        .enumerate()
        .map(|(i, m)| MechanismReport {
            mechanism: m.child().to_string(),
            kind: match m.kind() {
                MechanismKind::Categorical => "categorical",
                MechanismKind::Ordinal => "ordinal",
                MechanismKind::Constant { .. } => "constant",
            },
            alternatives: m.k(),
            parameters: m.n_free(),
            train_log_likelihood: tr.per_mechanism[i].1,
            validation_log_likelihood: va.per_mechanism[i].1,
            validation_mpe: mpe[i].1,
        })
        .collect();
    let b = scm.n_params();
    Ok(FitReport {
        seed: cfg.seed,
        config: cfg.clone(),
        train_rows: train.n_rows(),
        validation_rows: val.n_rows(),
        parameters: b,
        train_log_likelihood: tr.total,
        validation_log_likelihood: va.total,
        aic: crate::scm::aic(tr.total, b),
        clamped_probabilities: tr.clamped + va.clamped,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.log.len(),
        stopped_early: outcome.stopped_early,
        mechanisms,
    })
}

/// Model file, report, coefficient table and training curve.
pub(crate) fn write_fit(out: &Path, outcome: &FitOutcome, report: &FitReport) -> Result<()> {
    outcome.scm.save(&out.join("model.cctf"))?;
    write_json(&out.join("report.json"), report)?;
    write(
        &out.join("coefficients.csv"),
        csv_bytes(|b| outcome.scm.write_coefficients(b))?,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_loss", "validation_loss"])?;
    for e in &outcome.log {
        w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string()])?;
    }
    write(&out.join("training.csv"), w.into_inner().map_err(|e| Error::io("training.csv", e.into_error()))?)
}

pub(crate) struct Prepared {
    pub specs: Vec<VariableSpec>,
    pub dag: CausalDag,
    pub train: Dataset,
    pub val: Dataset,
}

fn prepare(r: &Resolved) -> Result<Prepared> {
    let specs = r.load_specs()?;
    let data = r.load_data(&specs)?;
    let dag = r.load_dag()?;
    r.load_knowledge()?.validate(&dag)?;
    let (train, val) = split(&data, TRAIN_RATIO, r.seed)?;
    Ok(Prepared { specs, dag, train, val })
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let r = Resolved::new(&a.common)?;
    let mut cfg = r.fit_config()?;
    if let Some(m) = a.layers {
        cfg.layers = m;
    }
    if let Some(e) = a.epochs {
        cfg.max_epochs = e;
    }
    let p = prepare(&r)?;
    let scm = Scm::build(&p.dag, &p.specs, r.outcome.as_deref(), &cfg)?;
    let outcome = fit(&scm, &p.train, &p.val, &cfg)?;
    let report = fit_report(&outcome, &cfg, &p.train, &p.val)?;
    let out = r.out_dir()?;
    write_fit(out, &outcome, &report)?;
    if let Some(var) = a.curve.or_else(|| r.file.curve.clone()) {
        write_curve(out, &outcome.scm, &p.val, &var)?;
    }
    eprintln!(
        "LL train {:.4} / validation {:.4}, AIC {:.4}",
        report.train_log_likelihood, report.validation_log_likelihood, report.aic
    );
    Ok(())
}

const CURVE_POINTS: usize = 21;

fn write_curve(out: &Path, scm: &Scm, data: &Dataset, variable: &str) -> Result<()> {
    let col = data.continuous(data.column_index(variable)?)?;
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect();
    let points = scm.substitution_curve(data, variable, &grid)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([variable, "mechanism", "alternative", "share"])?;
    for pt in &points {
        for (m, shares) in scm.mechanisms().iter().zip(&pt.shares) {
            for (label, s) in m.labels().iter().zip(shares) {
                w.write_record([pt.value.to_string(), m.child().to_string(), label.clone(), s.to_string()])?;
            }
        }
    }
    let path = out.join(format!("curve_{variable}.csv"));
    write(&path, w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?)
}

fn search_cmd(a: SearchArgs) -> Result<()> {
    let r = Resolved::new(&a.common)?;
    let mut base = r.fit_config()?;
    if let Some(e) = a.epochs {
        base.max_epochs = e;
    }
    let trials = a.trials.or(r.file.trials).unwrap_or(8);
    let plan = sample_plan(&base, trials, r.seed)?;
    let p = prepare(&r)?;
    let results = search::run_plan(&plan, &p, r.outcome.as_deref())?;
    let out = r.out_dir()?;
    write(&out.join("leaderboard.csv"), search::leaderboard_csv(&results)?)?;
    let best = results
        .iter()
        .find_map(|t| t.outcome.as_ref().ok().map(|o| (t, o)))
        .ok_or_else(|| Error::Numeric("every trial diverged".into()))?;
    let report = fit_report(best.1, &best.0.trial.config, &p.train, &p.val)?;
    write_fit(out, best.1, &report)?;
    eprintln!(
        "best trial {} (validation loss {:.6})",
        best.0.trial.index,
        best.1.best().val_loss
    );
    Ok(())
}

const LATENT_DRAWS: usize = 5;
const LATENT_BINS: usize = 30;

fn counterfactual_cmd(a: CounterfactualArgs) -> Result<()> {
    let r = Resolved::new(&a.common)?;
    let mut flow_cfg = r.flow_config()?;
    if let Some(e) = a.epochs {
        flow_cfg.max_epochs = e;
    }
    let model = a
        .model
        .or_else(|| r.file.model.clone())
        .ok_or_else(|| Error::Config("--model is required".into()))?;
    let scm = Scm::load(&model)?;
    let spec_text = a
        .intervene
        .or_else(|| r.file.intervene.clone())
        .ok_or_else(|| Error::Config("--intervene is required".into()))?;
    let spec = InterventionSpec::parse_hard(&spec_text, &scm)?;
    let outcome = r
        .outcome
        .clone()
        .ok_or_else(|| Error::Config("--outcome is required".into()))?;
    scm.mechanism(&outcome)?;
    // Reject bad targets before any training.
    crate::counterfactual::intervene(&scm, &spec)?;

    let specs = r.load_specs()?;
    let data = r.load_data(&specs)?;
    let (train, val) = split(&data, TRAIN_RATIO, r.seed)?;
    let out = r.out_dir()?;

    let mut vaes = Vec::new();
    for m in scm.mechanisms() {
        if matches!(m.kind(), MechanismKind::Constant { .. }) {
            continue;
        }
        let init = FlowVae::new(m, &flow_cfg)?;
        let fitted = fit_fvae(&init, &train, &val, &flow_cfg)?;
        fitted.vae.to_tensor_file().save(&out.join(format!("flow_{}.cctf", m.child())))?;
        write_latent_histogram(out, &fitted.vae, &data, r.seed)?;
        vaes.push(fitted.vae);
    }
    let ab = Abduction::new(scm, vaes, &data)?;
    ab.eps.save(&out.join("eps.cctf"))?;
    let report = ab.query(&spec, &outcome, &data)?;
    write(&out.join("rows.csv"), csv_bytes(|b| report.write_rows(b))?)?;
    write(&out.join("transitions.csv"), csv_bytes(|b| report.write_matrix(b))?)?;
    write_json(&out.join("shares.json"), &report)?;
    eprintln!(
        "{}: {:.2}% of rows moved down, {:.2}% up",
        report.intervention,
        100.0 * report.fraction_decreased,
        100.0 * report.fraction_increased
    );
    Ok(())
}

fn write_latent_histogram(out: &Path, vae: &FlowVae, data: &Dataset, seed: u64) -> Result<()> {
    let samples = latent_samples(vae, data, LATENT_DRAWS, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dimension", "bin_low", "bin_high", "count"])?;
    for d in 0..vae.latent_dim() {
        let xs: Vec<f64> = samples.iter().map(|(_, g)| g[d]).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / LATENT_BINS as f64 } else { 1.0 };
        let mut counts = [0usize; LATENT_BINS];
        for x in xs {
            let b = (((x - lo) / width) as usize).min(LATENT_BINS - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let a = lo + width * b as f64;
            w.write_record([d.to_string(), a.to_string(), (a + width).to_string(), c.to_string()])?;
        }
    }
    let path = out.join(format!("latent_{}.csv", vae.target()));
    write(&path, w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?)
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let r = Resolved::new(&a.common)?;
    let mut gen = match a.generator.or_else(|| r.file.generator.clone()) {
        Some(p) => GeneratorConfig::load(&p)?,
        None => GeneratorConfig::pedestrian_study(2500, r.seed),
    };
    gen.seed = r.seed;
    if let Some(n) = a.rows.or(r.file.rows) {
        gen.n = n;
    }
    let data = simulate(&gen)?;
    let out = r.out_dir()?;
    data.save_csv(&out.join("data.csv"))?;
    write(&out.join("specs.toml"), SpecSet::new(gen.specs()).to_toml())?;
    write(&out.join("dag.txt"), gen.dag()?.to_text())?;
    write(&out.join("knowledge.txt"), gen.knowledge().to_text())?;
    write(&out.join("generator.toml"), gen.to_toml())?;
    eprintln!("{} rows", data.n_rows());
    Ok(())
}

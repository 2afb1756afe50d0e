use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::vae::{abduct, parent_rows, FlowVae};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scm::{Mechanism, MechanismKind, Prediction, Propagation, Scm};
use crate::tensorfile::{Tensor, TensorFile};

const EPS_TAG: &str = "causal-choice/eps";

#[derive(Debug, Clone, PartialEq)]
pub enum InterventionKind {
    /// Fix the target at one category (0-based), cutting its parents.
    Hard { category: usize },
    /// Swap in a different mechanism for the target.
    Soft { mechanism: Box<Mechanism> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSpec {
    pub target: String,
    pub kind: InterventionKind,
}

impl InterventionSpec {
    pub fn hard(target: &str, category: usize) -> Self {
        Self {
            target: target.into(),
            kind: InterventionKind::Hard { category },
        }
    }

    pub fn soft(mechanism: Mechanism) -> Self {
        Self {
            target: mechanism.child().to_string(),
            kind: InterventionKind::Soft {
                mechanism: Box::new(mechanism),
            },
        }
    }

    /// `variable=label`, resolved against the model's variable specs.
    pub fn parse_hard(text: &str, scm: &Scm) -> Result<Self> {
        let (var, label) = text
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("intervention `{text}` is not of the form variable=label")))?;
        let (var, label) = (var.trim(), label.trim());
        let spec = scm
            .specs()
            .iter()
            .find(|s| s.name == var)
            .ok_or_else(|| Error::UnknownVariable(var.into()))?;
        let category = spec
            .category_of(label)
            .ok_or_else(|| Error::Config(format!("`{var}` has no category `{label}`")))?;
        Ok(Self::hard(var, category))
    }

    pub fn describe(&self, scm: &Scm) -> String {
        match &self.kind {
            InterventionKind::Hard { category } => {
                let label = scm
                    .specs()
                    .iter()
                    .find(|s| s.name == self.target)
                    .and_then(|s| s.labels.get(*category))
                    .cloned()
                    .unwrap_or_else(|| category.to_string());
                format!("do({} = {label})", self.target)
            }
            InterventionKind::Soft { .. } => format!("soft({})", self.target),
        }
    }
}

/// The interventional model. All mechanisms other than the target are
/// carried over untouched.
pub fn intervene(scm: &Scm, spec: &InterventionSpec) -> Result<Scm> {
    let v = scm.dag().index_of(&spec.target)?;
    let current = match scm.mechanism(&spec.target) {
        Ok(m) => m,
        Err(_) if scm.dag().is_root(v) => {
            return Err(Error::Structural(format!(
                "`{}` is exogenous; only endogenous variables can be intervened on",
                spec.target
            )))
        }
        Err(_) => {
            return Err(Error::Structural(format!(
                "`{}` has no mechanism in this model",
                spec.target
            )))
        }
    };
    let replacement = match &spec.kind {
        InterventionKind::Hard { category } => {
            if *category >= current.k() {
                return Err(Error::Config(format!(
                    "category {category} is out of range for `{}`",
                    spec.target
                )));
            }
            current.constant(*category)?
        }
        InterventionKind::Soft { mechanism } => {
            if mechanism.k() != current.k() || mechanism.labels() != current.labels() {
                return Err(Error::Structural(format!(
                    "replacement mechanism for `{}` has different categories",
                    spec.target
                )));
            }
            (**mechanism).clone()
        }
    };
    let mut out = scm.clone();
    out.replace_mechanism(replacement)?;
    Ok(out)
}

/// Abducted residuals, one `K`-vector per row and mechanism.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpsStore {
    rows: usize,
    entries: BTreeMap<String, Vec<Vec<f64>>>,
}

impl EpsStore {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            entries: BTreeMap::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn insert(&mut self, mechanism: &str, eps: Vec<Vec<f64>>) -> Result<()> {
        if eps.len() != self.rows {
            return Err(Error::Structural(format!(
                "residuals for `{mechanism}` cover {} rows, store has {}",
                eps.len(),
                self.rows
            )));
        }
        self.entries.insert(mechanism.into(), eps);
        Ok(())
    }

    pub fn get(&self, mechanism: &str, row: usize) -> Option<&[f64]> {
        self.entries.get(mechanism)?.get(row).map(Vec::as_slice)
    }

    pub fn mechanisms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let tensors = self
            .entries
            .iter()
            .map(|(name, rows)| {
                let k = rows.first().map_or(0, Vec::len);
                Tensor::new(format!("eps/{name}"), vec![rows.len(), k], rows.concat()).unwrap()
            })
            .collect();
        TensorFile {
            meta: serde_json::json!({ "format": EPS_TAG, "rows": self.rows }),
            tensors,
        }
    }

    pub fn from_tensor_file(file: &TensorFile) -> Result<Self> {
        if file.meta.get("format").and_then(|v| v.as_str()) != Some(EPS_TAG) {
            return Err(Error::format("residual file", "not a residual file"));
        }
        let rows = file
            .meta
            .get("rows")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::format("residual file", "missing row count"))? as usize;
        let mut store = Self::new(rows);
        for t in &file.tensors {
            let name = t
                .name
                .strip_prefix("eps/")
                .ok_or_else(|| Error::format("residual file", format!("unexpected tensor `{}`", t.name)))?;
            if t.shape.len() != 2 {
                return Err(Error::format("residual file", "residual tensors must be 2-D"));
            }
            let k = t.shape[1];
            let eps = if k == 0 {
                vec![Vec::new(); t.shape[0]]
            } else {
                t.data.chunks(k).map(<[f64]>::to_vec).collect()
            };
            store.insert(name, eps)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_tensor_file().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensor_file(&TensorFile::load(path)?)
    }
}

/// Residuals for every non-constant mechanism of `scm` on every row of
/// `data`, using the posterior-mean path (noise = 0).
pub fn abduct_all(scm: &Scm, vaes: &[FlowVae], data: &Dataset) -> Result<EpsStore> {
    let mut store = EpsStore::new(data.n_rows());
    for m in scm.mechanisms() {
        if matches!(m.kind(), MechanismKind::Constant { .. }) {
            continue;
        }
        let vae = vaes
            .iter()
            .find(|v| v.target() == m.child())
            .ok_or_else(|| Error::Structural(format!("no flow model for `{}`", m.child())))?;
        let zero = vec![0.0; vae.latent_dim()];
        let eps = parent_rows(m.parents(), data)?
            .iter()
            .map(|pa| abduct(vae, m, pa, &zero))
            .collect::<Result<Vec<_>>>()?;
        store.insert(m.child(), eps)?;
    }
    Ok(store)
}

/// Sequential evaluation with `U = systematic utility + ε` per mechanism,
/// argmax categories and hard propagation downstream.
pub fn predict_counterfactual(scm: &Scm, eps: &EpsStore, data: &Dataset) -> Result<Prediction> {
    if eps.rows() != data.n_rows() {
        return Err(Error::Structural(format!(
            "residuals cover {} rows, data has {}",
            eps.rows(),
            data.n_rows()
        )));
    }
    let names: Vec<&str> = scm.mechanisms().iter().map(Mechanism::child).collect();
    let lookup = |m: usize, r: usize| -> Result<Option<Vec<f64>>> {
        let mech = &scm.mechanisms()[m];
        if matches!(mech.kind(), MechanismKind::Constant { .. }) {
            return Ok(None);
        }
        eps.get(names[m], r)
            .map(|e| Some(e.to_vec()))
            .ok_or_else(|| Error::Evaluation(format!("no abducted residual for `{}`", names[m])))
    };
    scm.forward(data, Propagation::Hard, Some(&lookup))
}

/// `K×K` counts: entry `(i, j)` is the number of rows going from factual
/// category `i` to counterfactual category `j`.
pub fn transition_matrix(factual: &[usize], counterfactual: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if factual.len() != counterfactual.len() {
        return Err(Error::Structural("factual and counterfactual lengths differ".into()));
    }
    let mut m = vec![vec![0usize; k]; k];
    for (&a, &b) in factual.iter().zip(counterfactual) {
        if a >= k || b >= k {
            return Err(Error::Structural(format!("category out of range for K = {k}")));
        }
        m[a][b] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualReport {
    pub outcome: String,
    pub intervention: String,
    pub labels: Vec<String>,
    pub rows: usize,
    #[serde(skip)]
    pub factual: Vec<usize>,
    #[serde(skip)]
    pub counterfactual: Vec<usize>,
    pub transitions: Vec<Vec<usize>>,
    pub factual_shares: Vec<f64>,
    pub counterfactual_shares: Vec<f64>,
    /// Counterfactual minus factual share per category.
    pub share_deltas: Vec<f64>,
    pub fraction_decreased: f64,
    pub fraction_increased: f64,
    pub fraction_unchanged: f64,
}

impl CounterfactualReport {
    pub fn new(
        outcome: &str,
        intervention: &str,
        labels: &[String],
        factual: Vec<usize>,
        counterfactual: Vec<usize>,
    ) -> Result<Self> {
        let k = labels.len();
        let transitions = transition_matrix(&factual, &counterfactual, k)?;
        let n = factual.len();
        let denom = n.max(1) as f64;
        let shares = |v: &[usize]| -> Vec<f64> {
            let mut c = vec![0usize; k];
            for &x in v {
                c[x] += 1;
            }
            c.iter().map(|&x| x as f64 / denom).collect()
        };
        let fs = shares(&factual);
        let cs = shares(&counterfactual);
        let share_deltas = cs.iter().zip(&fs).map(|(c, f)| c - f).collect();
        let count = |p: fn(usize, usize) -> bool| {
            factual.iter().zip(&counterfactual).filter(|(&a, &b)| p(a, b)).count() as f64 / denom
        };
        Ok(Self {
            outcome: outcome.into(),
            intervention: intervention.into(),
            labels: labels.to_vec(),
            rows: n,
            fraction_decreased: count(|a, b| b < a),
            fraction_increased: count(|a, b| b > a),
            fraction_unchanged: count(|a, b| b == a),
            factual,
            counterfactual,
            transitions,
            factual_shares: fs,
            counterfactual_shares: cs,
            share_deltas,
        })
    }

    /// `row,factual,counterfactual` with category labels.
    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "factual", "counterfactual"])?;
        for (i, (&a, &b)) in self.factual.iter().zip(&self.counterfactual).enumerate() {
            w.write_record([i.to_string(), self.labels[a].clone(), self.labels[b].clone()])?;
        }
        w.flush().map_err(|e| Error::io("<rows>", e))?;
        Ok(())
    }

    /// Transition counts with factual categories as rows.
    pub fn write_matrix<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["factual \\ counterfactual".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.transitions) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(usize::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }
}

/// Everything needed to answer intervention queries on one dataset: the
/// model, one flow model per mechanism and the abducted residuals.
pub struct Abduction {
    pub scm: Scm,
    pub vaes: Vec<FlowVae>,
    pub eps: EpsStore,
}

impl Abduction {
    pub fn new(scm: Scm, vaes: Vec<FlowVae>, data: &Dataset) -> Result<Self> {
        let eps = abduct_all(&scm, &vaes, data)?;
        Ok(Self { scm, vaes, eps })
    }

    /// Factual and counterfactual outcome categories under `spec`.
    pub fn query(&self, spec: &InterventionSpec, outcome: &str, data: &Dataset) -> Result<CounterfactualReport> {
        let factual = predict_counterfactual(&self.scm, &self.eps, data)?;
        let int_scm = intervene(&self.scm, spec)?;
        let cf = predict_counterfactual(&int_scm, &self.eps, data)?;
        let labels = self.scm.mechanism(outcome)?.labels().to_vec();
        CounterfactualReport::new(
            outcome,
            &spec.describe(&self.scm),
            &labels,
            factual.categories_of(outcome)?.to_vec(),
            cf.categories_of(outcome)?.to_vec(),
        )
    }
}

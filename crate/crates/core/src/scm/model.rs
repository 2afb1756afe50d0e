use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fit::FitConfig;
use super::mechanism::{argmax, Mechanism, MechanismKind, ParentInfo, ParentValue};
use crate::data::{Dataset, GeneratorConfig, VarKind, VariableSpec};
use crate::error::{Error, Result};
use crate::graph::CausalDag;
use crate::tensorfile::{Tensor, TensorFile};

const FORMAT_TAG: &str = "causal-choice/scm";

/// A structural causal model: one mechanism per endogenous variable,
/// stored in an order where every parent precedes its child.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: CausalDag,
    specs: Vec<VariableSpec>,
    mechanisms: Vec<Mechanism>,
}

/// How upstream predictions feed their children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Full probability vectors become the children's dummy inputs.
    Soft,
    /// Only the argmax category is passed on.
    Hard,
}

/// Per-mechanism probabilities and argmax categories, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub variables: Vec<String>,
    /// `probs[m][row]` is the probability vector of mechanism `m`.
    pub probs: Vec<Vec<Vec<f64>>>,
    pub categories: Vec<Vec<usize>>,
}

impl Prediction {
    pub fn categories_of(&self, variable: &str) -> Result<&[usize]> {
        let m = self
            .variables
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| Error::UnknownVariable(variable.into()))?;
        Ok(&self.categories[m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLikelihood {
    pub total: f64,
    pub per_mechanism: Vec<(String, f64)>,
    /// Observations whose probability fell below the floor.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub value: f64,
    /// Mean probability vector per mechanism.
    pub shares: Vec<Vec<f64>>,
}

/// Teacher-forced design for one mechanism.
pub(crate) struct Design {
    pub x: Vec<f64>,
    pub width: usize,
    pub y: Vec<usize>,
}

/// `−2·LL + 2·B`.
pub fn aic(log_likelihood: f64, n_params: usize) -> f64 {
    -2.0 * log_likelihood + 2.0 * n_params as f64
}

impl Scm {
    /// Mechanisms for `outcome` and its endogenous ancestors, or for every
    /// variable with parents when `outcome` is `None`. Parameters are drawn
    /// from `cfg.seed`.
    pub fn build(
        dag: &CausalDag,
        specs: &[VariableSpec],
        outcome: Option<&str>,
        cfg: &FitConfig,
    ) -> Result<Self> {
        let ordered = order_specs(dag, specs)?;
        let targets: Vec<usize> = match outcome {
            Some(o) => {
                let seq = dag.mechanism_sequence(dag.index_of(o)?)?;
                if seq.is_empty() {
                    return Err(Error::Structural(format!("outcome `{o}` has no parents")));
                }
                seq
            }
            None => dag.topological_order().into_iter().filter(|&v| !dag.is_root(v)).collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (lo, hi) = cfg.threshold_range;
        let mut mechanisms = Vec::with_capacity(targets.len());
        for v in targets {
            let mut m = blank_mechanism(dag, &ordered, v, cfg.layers)?;
            let t = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            m.initialize(&mut rng, cfg.init_scale, t);
            mechanisms.push(m);
        }
        Ok(Self {
            dag: dag.clone(),
            specs: ordered,
            mechanisms,
        })
    }

    /// Assemble from explicit mechanisms (checked against the graph).
    pub fn from_parts(dag: CausalDag, specs: &[VariableSpec], mechanisms: Vec<Mechanism>) -> Result<Self> {
        let specs = order_specs(&dag, specs)?;
        let scm = Self {
            dag,
            specs,
            mechanisms,
        };
        scm.check()?;
        Ok(scm)
    }

    /// The ordered-logit generator written as an SCM with no residual
    /// layers: `P(x > k) = σ(β·Pa − t_k)`.
    pub fn from_generator(cfg: &GeneratorConfig) -> Result<Self> {
        let (cfg, _) = cfg.validated()?;
        let dag = cfg.dag()?;
        let specs = cfg.specs();
        let mut mechanisms = Vec::new();
        for v in dag.topological_order() {
            if dag.is_root(v) {
                continue;
            }
            let e = cfg
                .endogenous
                .iter()
                .find(|e| e.name == dag.name(v))
                .ok_or_else(|| Error::Config(format!("`{}` has parents but no equation", dag.name(v))))?;
            let mut m = blank_mechanism(&dag, &specs, v, 0)?;
            let last = m.k() - 1;
            for c in &e.coefficients {
                let pspec = &specs[dag.index_of(&c.parent)?];
                let level = pspec
                    .category_of(&c.level)
                    .filter(|&l| l > 0)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "`{}`: coefficient on `{}={}` must name a non-reference level",
                            e.name, c.parent, c.level
                        ))
                    })?;
                let f = m.feature_index(&c.parent, Some(level)).expect("parent feature exists");
                let cur = m.beta(last, f);
                m.set_beta(last, f, cur + c.value)?;
            }
            let biases: Vec<f64> = e.thresholds.iter().map(|t| -t).collect();
            m.set_ordinal(&biases, &vec![0.0; m.k() - 1])?;
            mechanisms.push(m);
        }
        Self::from_parts(dag, &specs, mechanisms)
    }

    fn check(&self) -> Result<()> {
        let mut seen = vec![false; self.dag.len()];
        for m in &self.mechanisms {
            let v = self.dag.index_of(m.child())?;
            if seen[v] {
                return Err(Error::Structural(format!("two mechanisms for `{}`", m.child())));
            }
            let mut dag_parents: Vec<&str> = self.dag.parents(v).iter().map(|&p| self.dag.name(p)).collect();
            let mut mech_parents: Vec<&str> = m.parents().iter().map(|p| p.name.as_str()).collect();
            dag_parents.sort_unstable();
            mech_parents.sort_unstable();
            if dag_parents != mech_parents {
                return Err(Error::Structural(format!(
                    "mechanism `{}` has parents {mech_parents:?}, graph says {dag_parents:?}",
                    m.child()
                )));
            }
            for &p in self.dag.parents(v) {
                let has_mech = self.mechanisms.iter().any(|o| o.child() == self.dag.name(p));
                if has_mech && !seen[p] {
                    return Err(Error::Structural(format!(
                        "mechanism `{}` precedes its parent `{}`",
                        m.child(),
                        self.dag.name(p)
                    )));
                }
            }
            if self.specs[v].cardinality() != m.k() {
                return Err(Error::Structural(format!("`{}`: K differs from its spec", m.child())));
            }
            seen[v] = true;
        }
        Ok(())
    }

    pub fn dag(&self) -> &CausalDag {
        &self.dag
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn mechanism(&self, child: &str) -> Result<&Mechanism> {
        self.mechanisms
            .iter()
            .find(|m| m.child() == child)
            .ok_or_else(|| Error::UnknownVariable(child.into()))
    }

    pub fn mechanism_index(&self, child: &str) -> Option<usize> {
        self.mechanisms.iter().position(|m| m.child() == child)
    }

    /// Replace the mechanism for `child` (and its incoming edges).
    pub(crate) fn replace_mechanism(&mut self, mechanism: Mechanism) -> Result<()> {
        let i = self
            .mechanism_index(mechanism.child())
            .ok_or_else(|| Error::UnknownVariable(mechanism.child().into()))?;
        let v = self.dag.index_of(mechanism.child())?;
        let mut dag = self.dag.clone();
        dag.clear_parents(v);
        for p in mechanism.parents() {
            dag.add_edge(dag.index_of(&p.name)?, v)?;
        }
        let mut mechanisms = self.mechanisms.clone();
        mechanisms[i] = mechanism;
        let next = Self {
            dag,
            specs: self.specs.clone(),
            mechanisms,
        };
        next.check()?;
        *self = next;
        Ok(())
    }

    /// Free scalars across all mechanisms.
    pub fn n_params(&self) -> usize {
        self.mechanisms.iter().map(Mechanism::n_free).sum()
    }

    /// All mechanism parameters, concatenated in mechanism order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.mechanisms.iter().flat_map(|m| m.params().iter().copied()).collect()
    }

    pub fn flat_trainable(&self) -> Vec<bool> {
        self.mechanisms.iter().flat_map(|m| m.trainable().iter().copied()).collect()
    }

    pub(crate) fn offsets(&self) -> Vec<usize> {
        let mut out = vec![0];
        for m in &self.mechanisms {
            out.push(out.last().unwrap() + m.params().len());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != *self.offsets().last().unwrap() {
            return Err(Error::Structural("wrong number of model parameters".into()));
        }
        let offs = self.offsets();
        for (i, m) in self.mechanisms.iter_mut().enumerate() {
            m.set_params(&flat[offs[i]..offs[i + 1]])?;
        }
        Ok(())
    }

    fn column_for(&self, data: &Dataset, name: &str) -> Result<usize> {
        let col = data.column_index(name)?;
        let want = &self.specs[self.dag.index_of(name)?];
        let got = data.spec(col);
        let compatible = match want.kind {
            VarKind::Continuous => got.kind == VarKind::Continuous,
            _ => got.is_discrete() && got.labels == want.labels,
        };
        if !compatible {
            return Err(Error::Structural(format!(
                "column `{name}` in the data does not match the model's variable spec"
            )));
        }
        Ok(col)
    }

    fn observed(&self, data: &Dataset, col: usize, row: usize) -> ParentValue {
        match data.value(row, col) {
            crate::data::Value::Cat(c) => ParentValue::Category(c),
            crate::data::Value::Real(x) => ParentValue::Real(x),
        }
    }

    /// Observed-parent design rows and observed outcomes, per mechanism.
    pub(crate) fn designs(&self, data: &Dataset) -> Result<Vec<Design>> {
        self.mechanisms
            .iter()
            .map(|m| {
                let ycol = self.column_for(data, m.child())?;
                let y = data.discrete(ycol)?.to_vec();
                let pcols: Vec<usize> = m
                    .parents()
                    .iter()
                    .map(|p| self.column_for(data, &p.name))
                    .collect::<Result<_>>()?;
                let width = m.features().len();
                let mut x = Vec::with_capacity(width * data.n_rows());
                for r in 0..data.n_rows() {
                    let pa: Vec<ParentValue> = pcols.iter().map(|&c| self.observed(data, c, r)).collect();
                    x.extend(m.encode(&pa)?);
                }
                Ok(Design { x, width, y })
            })
            .collect()
    }

    /// `Σ_n Σ_i ln P(x_i | Pa_i)` with every parent at its observed value.
    pub fn joint_log_likelihood(&self, data: &Dataset) -> Result<LogLikelihood> {
        let designs = self.designs(data)?;
        let mut per = Vec::with_capacity(self.mechanisms.len());
        let mut clamped = 0;
        let mut total = 0.0;
        for (m, d) in self.mechanisms.iter().zip(&designs) {
            let mut s = 0.0;
            for (r, &y) in d.y.iter().enumerate() {
                let (lp, c) = m.log_prob(m.params(), &d.x[r * d.width..(r + 1) * d.width], y, 0.0);
                s += lp;
                clamped += usize::from(c);
            }
            total += s;
            per.push((m.child().to_string(), s));
        }
        Ok(LogLikelihood {
            total,
            per_mechanism: per,
            clamped,
        })
    }

    /// Walk the mechanisms in order. Parents without a mechanism are read
    /// from `data`; the rest come from upstream predictions. `offset`, when
    /// given, supplies a residual added to each mechanism's systematic
    /// utility for a row (`None` for a mechanism means no residual).
    pub fn forward(
        &self,
        data: &Dataset,
        mode: Propagation,
        offset: Option<&dyn Fn(usize, usize) -> Result<Option<Vec<f64>>>>,
    ) -> Result<Prediction> {
        let n = data.n_rows();
        let mech_of: BTreeMap<&str, usize> = self
            .mechanisms
            .iter()
            .enumerate()
            .map(|(i, m)| (m.child(), i))
            .collect();
        let mut sources: Vec<Vec<Result<usize, usize>>> = Vec::new();
        for m in &self.mechanisms {
            let mut src = Vec::new();
            for p in m.parents() {
                src.push(match mech_of.get(p.name.as_str()) {
                    Some(&i) => Err(i),
                    None => Ok(self.column_for(data, &p.name).map_err(|e| {
                        Error::Evaluation(format!("no value for parent `{}`: {e}", p.name))
                    })?),
                });
            }
            sources.push(src);
        }
        let mut probs: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(n); self.mechanisms.len()];
        let mut cats: Vec<Vec<usize>> = vec![Vec::with_capacity(n); self.mechanisms.len()];
        for r in 0..n {
            for (i, m) in self.mechanisms.iter().enumerate() {
                let pa: Vec<ParentValue> = sources[i]
                    .iter()
                    .map(|s| match *s {
                        Ok(col) => self.observed(data, col, r),
                        Err(up) => match mode {
                            Propagation::Soft => ParentValue::Probs(probs[up][r].clone()),
                            Propagation::Hard => ParentValue::Category(cats[up][r]),
                        },
                    })
                    .collect();
                let x = m.encode(&pa)?;
                let p = match offset.map(|f| f(i, r)).transpose()?.flatten() {
                    Some(eps) if !matches!(m.kind(), MechanismKind::Constant { .. }) => {
                        let u = m.utility_of(&x);
                        if eps.len() != u.len() {
                            return Err(Error::Evaluation(format!(
                                "residual for `{}` has length {}, expected {}",
                                m.child(),
                                eps.len(),
                                u.len()
                            )));
                        }
                        let u: Vec<f64> = u.iter().zip(&eps).map(|(a, b)| a + b).collect();
                        m.probabilities_at_utility(&u)?
                    }
                    _ => m.probs_of(&x),
                };
                if p.iter().any(|q| !q.is_finite()) {
                    return Err(Error::Numeric(format!("non-finite probability for `{}` at row {r}", m.child())));
                }
                cats[i].push(argmax(&p));
                probs[i].push(p);
            }
        }
        Ok(Prediction {
            variables: self.mechanisms.iter().map(|m| m.child().to_string()).collect(),
            probs,
            categories: cats,
        })
    }

    /// Sequential prediction with soft propagation; argmax per mechanism.
    pub fn predict_sequential(&self, data: &Dataset) -> Result<Prediction> {
        self.forward(data, Propagation::Soft, None)
    }

    /// Fraction of rows whose predicted category differs from the observed one.
    pub fn mpe(&self, data: &Dataset) -> Result<Vec<(String, f64)>> {
        let pred = self.predict_sequential(data)?;
        self.mechanisms
            .iter()
            .zip(&pred.categories)
            .map(|(m, yhat)| {
                let y = data.discrete(self.column_for(data, m.child())?)?;
                Ok((m.child().to_string(), mean_error(y, yhat)))
            })
            .collect()
    }

    pub fn aic(&self, data: &Dataset) -> Result<f64> {
        Ok(aic(self.joint_log_likelihood(data)?.total, self.n_params()))
    }

    /// Mean predicted probabilities with `variable` set to each grid value
    /// for every row.
    pub fn substitution_curve(&self, data: &Dataset, variable: &str, grid: &[f64]) -> Result<Vec<CurvePoint>> {
        let used = self
            .mechanisms
            .iter()
            .any(|m| m.parents().iter().any(|p| p.name == variable && !p.is_discrete()));
        if !used {
            return Err(Error::Query(format!(
                "`{variable}` is not a continuous parent of any mechanism"
            )));
        }
        let col = data.column_index(variable)?;
        let n = data.n_rows().max(1) as f64;
        grid.iter()
            .map(|&value| {
                let pred = self.predict_sequential(&data.with_constant(col, value)?)?;
                let shares = pred
                    .probs
                    .iter()
                    .zip(&self.mechanisms)
                    .map(|(rows, m)| {
                        let mut acc = vec![0.0; m.k()];
                        for p in rows {
                            for (a, q) in acc.iter_mut().zip(p) {
                                *a += q;
                            }
                        }
                        acc.iter().map(|a| a / n).collect()
                    })
                    .collect();
                Ok(CurvePoint { value, shares })
            })
            .collect()
    }

    /// CSV rows `mechanism,alternative,parent,estimate` for free linear
    /// coefficients and ordinal thresholds.
    pub fn write_coefficients<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mechanism", "alternative", "parent", "estimate"])?;
        for m in &self.mechanisms {
            let f = m.features().len();
            for alt in 0..m.k() {
                for j in 0..f {
                    if m.trainable()[alt * f + j] {
                        w.write_record([
                            m.child(),
                            m.labels()[alt].as_str(),
                            &m.feature_label(j),
                            &m.beta(alt, j).to_string(),
                        ])?;
                    }
                }
            }
            for (k, b) in m.ordinal_biases().iter().enumerate() {
                w.write_record([
                    m.child(),
                    m.labels()[k + 1].as_str(),
                    &format!("(threshold {})", k + 1),
                    &b.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<coefficients>", e))?;
        Ok(())
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        let mut tensors = Vec::new();
        for m in &self.mechanisms {
            tensors.extend(mechanism_tensors(m));
        }
        TensorFile {
            meta: serde_json::json!({
                "format": FORMAT_TAG,
                "variables": self.dag.names(),
                "dag": self.dag.to_text(),
                "specs": self.specs,
                "mechanisms": self.mechanisms,
            }),
            tensors,
        }
    }

    pub fn from_tensor_file(file: &TensorFile) -> Result<Self> {
        let bad = |m: String| Error::format("model file", m);
        if file.meta.get("format").and_then(|v| v.as_str()) != Some(FORMAT_TAG) {
            return Err(bad("not a model file".into()));
        }
        let field = |k: &str| file.meta.get(k).cloned().ok_or_else(|| bad(format!("missing `{k}`")));
        let names: Vec<String> = serde_json::from_value(field("variables")?)?;
        let dag_text: String = serde_json::from_value(field("dag")?)?;
        let dag = CausalDag::parse(&dag_text)?.with_variable_order(&names)?;
        let specs: Vec<VariableSpec> = serde_json::from_value(field("specs")?)?;
        let mut mechanisms: Vec<Mechanism> = serde_json::from_value(field("mechanisms")?)?;
        for m in &mut mechanisms {
            restore_mechanism(m, file)?;
        }
        Self::from_parts(dag, &specs, mechanisms)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_tensor_file().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensor_file(&TensorFile::load(path)?)
    }
}

pub(crate) fn mean_error(y: &[usize], yhat: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let wrong = y.iter().zip(yhat).filter(|(a, b)| a != b).count();
    wrong as f64 / y.len() as f64
}

/// Named tensors for one mechanism, split by role.
pub(crate) fn mechanism_tensors(m: &Mechanism) -> Vec<Tensor> {
    let k = m.k();
    let f = m.features().len();
    let p = m.params();
    let c = m.child();
    let mut out = vec![
        Tensor::new(format!("{c}/beta"), vec![k, f], p[..k * f].to_vec()).unwrap(),
        Tensor::new(
            format!("{c}/residual"),
            vec![m.layers(), k, k],
            p[k * f..k * f + m.layers() * k * k].to_vec(),
        )
        .unwrap(),
    ];
    if m.kind() == MechanismKind::Ordinal {
        let o = k * f + m.layers() * k * k;
        out.push(Tensor::new(format!("{c}/ordinal_w"), vec![k - 1], p[o..o + k - 1].to_vec()).unwrap());
        out.push(Tensor::new(format!("{c}/ordinal_b1"), vec![1], vec![p[o + k - 1]]).unwrap());
        out.push(Tensor::new(format!("{c}/ordinal_delta"), vec![k - 2], p[o + k..].to_vec()).unwrap());
    }
    out
}

pub(crate) fn restore_mechanism(m: &mut Mechanism, file: &TensorFile) -> Result<()> {
    let c = m.child().to_string();
    let mut roles = vec!["beta", "residual"];
    if m.kind() == MechanismKind::Ordinal {
        roles.extend(["ordinal_w", "ordinal_b1", "ordinal_delta"]);
    }
    let mut flat = Vec::new();
    for role in roles {
        flat.extend_from_slice(&file.get(&format!("{c}/{role}"))?.data);
    }
    m.restore_params(flat)
}

impl Mechanism {
    /// Canonical bytes of this mechanism alone (structure plus parameters).
    pub fn to_bytes(&self) -> Vec<u8> {
        TensorFile {
            meta: serde_json::to_value(self).expect("mechanism serialises"),
            tensors: mechanism_tensors(self),
        }
        .to_bytes()
    }
}

fn order_specs(dag: &CausalDag, specs: &[VariableSpec]) -> Result<Vec<VariableSpec>> {
    dag.names()
        .iter()
        .map(|n| {
            specs
                .iter()
                .find(|s| &s.name == n)
                .cloned()
                .ok_or_else(|| Error::Structural(format!("no variable spec for `{n}`")))
        })
        .collect()
}

fn blank_mechanism(dag: &CausalDag, specs: &[VariableSpec], v: usize, layers: usize) -> Result<Mechanism> {
    let spec = &specs[v];
    let kind = match spec.kind {
        VarKind::Categorical => MechanismKind::Categorical,
        VarKind::Ordinal => MechanismKind::Ordinal,
        VarKind::Continuous => {
            return Err(Error::Structural(format!(
                "`{}` is continuous and cannot be modelled as a choice",
                spec.name
            )))
        }
    };
    if spec.exogenous {
        return Err(Error::Structural(format!("`{}` is declared exogenous but has parents", spec.name)));
    }
    let mut parents = Vec::new();
    for &p in dag.parents(v) {
        let ps = &specs[p];
        if ps.is_discrete() {
            let labels: Vec<&str> = ps.labels.iter().map(String::as_str).collect();
            parents.push(ParentInfo::discrete(&ps.name, &labels));
            continue;
        }
        let mut info = ParentInfo::continuous(&ps.name);
        if let Some(a) = ps.alternative.as_ref().filter(|a| a.variable == spec.name) {
            let alt = spec.category_of(&a.category).ok_or_else(|| {
                Error::Config(format!(
                    "`{}` is attached to unknown alternative `{}` of `{}`",
                    ps.name, a.category, spec.name
                ))
            })?;
            info = info.for_alternative(alt);
        }
        parents.push(info);
    }
    let labels: Vec<&str> = spec.labels.iter().map(String::as_str).collect();
    Mechanism::new(&spec.name, &labels, kind, parents, layers)
}

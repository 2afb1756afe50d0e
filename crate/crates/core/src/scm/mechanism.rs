use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_softmax_at, softmax_real, Real};

/// Floor applied to probabilities inside the log-likelihood.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum MechanismKind {
    Categorical,
    Ordinal,
    /// Emits one category with probability 1 (a hard intervention).
    Constant { category: usize },
}

/// A parent as seen by one mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentInfo {
    pub name: String,
    /// Category labels of a discrete parent; empty for a continuous one.
    pub labels: Vec<String>,
    /// Continuous attribute that belongs to one alternative of this mechanism.
    pub alternative: Option<usize>,
}

impl ParentInfo {
    pub fn discrete(name: &str, labels: &[&str]) -> Self {
        Self {
            name: name.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            alternative: None,
        }
    }

    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.into(),
            labels: Vec::new(),
            alternative: None,
        }
    }

    pub fn for_alternative(mut self, alternative: usize) -> Self {
        self.alternative = Some(alternative);
        self
    }

    pub fn is_discrete(&self) -> bool {
        !self.labels.is_empty()
    }
}

/// Value supplied for one parent when evaluating a mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum ParentValue {
    /// Observed category, 0-based.
    Category(usize),
    /// Probability vector over the parent's categories (soft encoding).
    Probs(Vec<f64>),
    Real(f64),
}

/// One column of the design row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum Feature {
    Intercept,
    /// Dummy for `level` (≥ 1) of a discrete parent; level 0 is the reference.
    Level { parent: usize, level: usize },
    Value { parent: usize },
}

/// One structural equation `x := f(Pa, β)`.
///
/// Parameters live in a single flat vector laid out as
/// `β (K×F) | W¹..Wᴹ (M×K×K) | w (K−1) | b₁ | δ (K−2)`, the last three for
/// the ordinal kind only. `trainable` marks the entries fixed for
/// identification (reference intercept, masked attributes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    child: String,
    labels: Vec<String>,
    kind: MechanismKind,
    parents: Vec<ParentInfo>,
    features: Vec<Feature>,
    layers: usize,
    #[serde(skip)]
    params: Vec<f64>,
    #[serde(skip)]
    trainable: Vec<bool>,
}

impl Mechanism {
    /// A mechanism with all parameters zero.
    pub fn new(
        child: &str,
        labels: &[&str],
        kind: MechanismKind,
        parents: Vec<ParentInfo>,
        layers: usize,
    ) -> Result<Self> {
        let k = labels.len();
        if k < 2 {
            return Err(Error::Structural(format!("mechanism `{child}` needs K ≥ 2")));
        }
        if let MechanismKind::Constant { category } = kind {
            if category >= k {
                return Err(Error::Structural(format!(
                    "constant category {category} out of range for `{child}`"
                )));
            }
        }
        let mut features = Vec::new();
        if kind == MechanismKind::Categorical {
            features.push(Feature::Intercept);
        }
        if !matches!(kind, MechanismKind::Constant { .. }) {
            if let Some(p) = parents.iter().find(|p| p.alternative.is_some_and(|a| a >= k)) {
                return Err(Error::Structural(format!(
                    "parent `{}` attached to a missing alternative of `{child}`",
                    p.name
                )));
            }
            features.extend(parent_features(&parents)?);
        }
        let mut m = Self {
            child: child.into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            kind,
            parents,
            features,
            layers,
            params: Vec::new(),
            trainable: Vec::new(),
        };
        m.params = vec![0.0; m.n_slots()];
        m.trainable = m.trainable_mask();
        Ok(m)
    }

    /// Draw β entries uniformly from `±scale`; set the first threshold so
    /// that `P(x > 1) = threshold` at zero utility.
    pub fn initialize<R: Rng>(&mut self, rng: &mut R, scale: f64, threshold: f64) {
        let nb = self.k() * self.features.len();
        for i in 0..nb {
            let draw = rng.random_range(-scale..=scale);
            if self.trainable[i] {
                self.params[i] = draw;
            }
        }
        if self.kind == MechanismKind::Ordinal {
            let t = threshold.clamp(1e-6, 1.0 - 1e-6);
            let b1 = self.ord_offset() + self.k() - 1;
            self.params[b1] = (t / (1.0 - t)).ln();
        }
    }

    pub fn child(&self) -> &str {
        &self.child
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn parents(&self) -> &[ParentInfo] {
        &self.parents
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn trainable(&self) -> &[bool] {
        &self.trainable
    }

    /// Number of free scalars (the `B` of AIC).
    pub fn n_free(&self) -> usize {
        self.trainable.iter().filter(|&&t| t).count()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Structural(format!(
                "`{}` has {} parameters, got {}",
                self.child,
                self.params.len(),
                params.len()
            )));
        }
        for (i, (&p, &t)) in params.iter().zip(&self.trainable).enumerate() {
            if !t && p != self.params[i] {
                return Err(Error::Structural(format!(
                    "`{}`: parameter {i} is fixed for identification",
                    self.child
                )));
            }
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub(crate) fn restore_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.n_slots() {
            return Err(Error::format("model file", format!("`{}`: wrong parameter count", self.child)));
        }
        self.params = params;
        self.trainable = self.trainable_mask();
        Ok(())
    }

    pub fn beta(&self, alternative: usize, feature: usize) -> f64 {
        self.params[alternative * self.features.len() + feature]
    }

    pub fn set_beta(&mut self, alternative: usize, feature: usize, value: f64) -> Result<()> {
        let i = alternative * self.features.len() + feature;
        if !self.trainable.get(i).copied().unwrap_or(false) {
            return Err(Error::Structural(format!(
                "`{}`: β[{alternative}][{feature}] is not a free parameter",
                self.child
            )));
        }
        self.params[i] = value;
        Ok(())
    }

    /// Entry `(i, j)` of residual matrix `Wᵐ`, `m` counted from 1.
    pub fn set_residual(&mut self, m: usize, i: usize, j: usize, value: f64) -> Result<()> {
        let k = self.k();
        if m == 0 || m > self.layers || i >= k || j >= k {
            return Err(Error::Structural("residual index out of range".into()));
        }
        let at = self.residual_offset() + (m - 1) * k * k + i * k + j;
        self.params[at] = value;
        Ok(())
    }

    /// Ordinal thresholds: `b_k` for k = 1..K−1 (must be strictly decreasing)
    /// and the penultimate weights `w_1..w_{K−1}` (`w_K` is fixed at 1).
    pub fn set_ordinal(&mut self, biases: &[f64], weights: &[f64]) -> Result<()> {
        let k = self.k();
        if self.kind != MechanismKind::Ordinal || biases.len() != k - 1 || weights.len() != k - 1 {
            return Err(Error::Structural("ordinal parameters need K−1 biases and weights".into()));
        }
        if biases.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Structural("ordinal biases must be strictly decreasing".into()));
        }
        let o = self.ord_offset();
        self.params[o..o + k - 1].copy_from_slice(weights);
        self.params[o + k - 1] = biases[0];
        for j in 0..k - 2 {
            self.params[o + k + j] = (biases[j] - biases[j + 1]).ln();
        }
        Ok(())
    }

    /// Ordinal biases `b_1 > b_2 > … > b_{K−1}`.
    pub fn ordinal_biases(&self) -> Vec<f64> {
        if self.kind != MechanismKind::Ordinal {
            return Vec::new();
        }
        self.biases_of(&self.params)
    }

    /// Index of β for a parent feature (`level` for discrete parents).
    pub fn feature_index(&self, parent: &str, level: Option<usize>) -> Option<usize> {
        let p = self.parents.iter().position(|x| x.name == parent)?;
        self.features.iter().position(|f| match (*f, level) {
            (Feature::Level { parent: q, level: l }, Some(want)) => q == p && l == want,
            (Feature::Value { parent: q }, None) => q == p,
            _ => false,
        })
    }

    pub fn feature_label(&self, f: usize) -> String {
        match self.features[f] {
            Feature::Intercept => "(intercept)".into(),
            Feature::Level { parent, level } => {
                let p = &self.parents[parent];
                format!("{}={}", p.name, p.labels[level])
            }
            Feature::Value { parent } => self.parents[parent].name.clone(),
        }
    }

    fn n_slots(&self) -> usize {
        let k = self.k();
        let ord = if self.kind == MechanismKind::Ordinal { 2 * k - 2 } else { 0 };
        k * self.features.len() + self.layers * k * k + ord
    }

    fn residual_offset(&self) -> usize {
        self.k() * self.features.len()
    }

    fn ord_offset(&self) -> usize {
        self.residual_offset() + self.layers * self.k() * self.k()
    }

    fn trainable_mask(&self) -> Vec<bool> {
        let k = self.k();
        let mut mask = vec![true; self.n_slots()];
        if matches!(self.kind, MechanismKind::Constant { .. }) {
            mask.iter_mut().for_each(|m| *m = false);
            return mask;
        }
        let f = self.features.len();
        for alt in 0..k {
            for (j, feat) in self.features.iter().enumerate() {
                let free = match self.kind {
                    MechanismKind::Ordinal => alt == k - 1,
                    _ => match *feat {
                        Feature::Value { parent } => match self.parents[parent].alternative {
                            Some(a) => a == alt,
                            None => alt > 0,
                        },
                        _ => alt > 0,
                    },
                };
                mask[alt * f + j] = free;
            }
        }
        mask
    }

    fn biases_of<T: Real>(&self, p: &[T]) -> Vec<T> {
        let k = self.k();
        let o = self.ord_offset();
        let mut b = Vec::with_capacity(k - 1);
        b.push(p[o + k - 1]);
        for j in 0..k - 2 {
            let prev = b[j];
            b.push(prev - p[o + k + j].exp());
        }
        b
    }

    /// Design row for this mechanism's parents.
    pub fn encode(&self, pa: &[ParentValue]) -> Result<Vec<f64>> {
        encode_row(&self.features, &self.parents, pa, &self.child)
    }

    /// `(V⁰, Vᴹ, g)` for design row `x` under parameters `p`.
    pub(crate) fn stages<T: Real>(&self, p: &[T], x: &[f64], zero: T) -> (Vec<T>, Vec<T>, Vec<T>) {
        let k = self.k();
        let f = self.features.len();
        let v0: Vec<T> = (0..k)
            .map(|alt| {
                let row = alt * f..(alt + 1) * f;
                if f == 0 || !self.trainable[row.clone()].iter().any(|&t| t) {
                    zero
                } else {
                    T::dot_const(&p[row], x)
                }
            })
            .collect();
        let mut v = v0.clone();
        let mut g = vec![zero; k];
        let r = self.residual_offset();
        for m in 0..self.layers {
            let sp: Vec<T> = (0..k)
                .map(|i| {
                    let start = r + m * k * k + i * k;
                    T::dot(&p[start..start + k], &v).softplus()
                })
                .collect();
            for i in 0..k {
                v[i] = v[i] - sp[i];
                g[i] = g[i] - sp[i];
            }
        }
        (v0, v, g)
    }

    /// Choice probabilities from already computed stages. `u` replaces the
    /// systematic utility when given (abducted residual added).
    pub(crate) fn probs_from<T: Real>(&self, p: &[T], v0: &[T], vm: &[T], g: &[T], zero: T) -> Vec<T> {
        match self.kind {
            MechanismKind::Categorical => softmax_real(&self.shifted(v0, g)),
            MechanismKind::Ordinal => self.ordinal_probs(p, vm),
            MechanismKind::Constant { category } => (0..self.k())
                .map(|i| zero + f64::from(u8::from(i == category)))
                .collect(),
        }
    }

    /// `V⁰ + (g − max g)`: equal to `Vᴹ` up to a constant, and bitwise equal
    /// to `V⁰` when every residual term is the same.
    fn shifted<T: Real>(&self, v0: &[T], g: &[T]) -> Vec<T> {
        if self.layers == 0 {
            return v0.to_vec();
        }
        let gmax = g.iter().map(|x| x.value()).fold(f64::NEG_INFINITY, f64::max);
        v0.iter().zip(g).map(|(&a, &b)| a + (b - gmax)).collect()
    }

    fn cumulative_logits<T: Real>(&self, p: &[T], u: &[T]) -> Vec<T> {
        let k = self.k();
        let o = self.ord_offset();
        let wu = T::dot(&p[o..o + k - 1], &u[..k - 1]) + u[k - 1];
        self.biases_of(p).into_iter().map(|b| wu + b).collect()
    }

    fn ordinal_probs<T: Real>(&self, p: &[T], u: &[T]) -> Vec<T> {
        let z = self.cumulative_logits(p, u);
        let k = self.k();
        let c: Vec<T> = z.iter().map(|&zk| zk.sigmoid()).collect();
        let mut out = Vec::with_capacity(k);
        out.push((-z[0]).sigmoid());
        for j in 1..k - 1 {
            out.push(c[j - 1] - c[j]);
        }
        out.push(c[k - 2]);
        out
    }

    /// `ln P(x = y | Pa)` and whether the probability floor was hit.
    pub(crate) fn log_prob<T: Real>(&self, p: &[T], x: &[f64], y: usize, zero: T) -> (T, bool) {
        let floor = PROB_FLOOR.ln();
        if let MechanismKind::Constant { category } = self.kind {
            return if y == category { (zero, false) } else { (zero + floor, true) };
        }
        let (v0, vm, g) = self.stages(p, x, zero);
        let lp = match self.kind {
            MechanismKind::Categorical => log_softmax_at(&self.shifted(&v0, &g), y),
            _ => self.ordinal_probs(p, &vm)[y].ln(),
        };
        if lp.value().is_nan() || lp.value() < floor {
            (zero + floor, true)
        } else {
            (lp, false)
        }
    }

    /// `Vᴹ = V⁰ + g`, the systematic utility.
    pub fn systematic_utility(&self, pa: &[ParentValue]) -> Result<Vec<f64>> {
        let x = self.encode(pa)?;
        Ok(self.utility_of(&x))
    }

    pub(crate) fn utility_of(&self, x: &[f64]) -> Vec<f64> {
        self.stages(&self.params, x, 0.0).1
    }

    pub fn choice_probabilities(&self, pa: &[ParentValue]) -> Result<Vec<f64>> {
        let x = self.encode(pa)?;
        Ok(self.probs_of(&x))
    }

    pub(crate) fn probs_of(&self, x: &[f64]) -> Vec<f64> {
        let (v0, vm, g) = self.stages(&self.params, x, 0.0);
        self.probs_from(&self.params, &v0, &vm, &g, 0.0)
    }

    /// Probabilities when the utility vector is given directly (systematic
    /// utility plus an abducted residual).
    pub fn probabilities_at_utility(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.k() {
            return Err(Error::Evaluation(format!(
                "`{}`: utility vector of length {} for K = {}",
                self.child,
                u.len(),
                self.k()
            )));
        }
        Ok(match self.kind {
            MechanismKind::Categorical => softmax_real(u),
            MechanismKind::Ordinal => self.ordinal_probs(&self.params, u),
            MechanismKind::Constant { .. } => self.probs_from(&self.params, u, u, u, 0.0),
        })
    }

    pub(crate) fn constant(&self, category: usize) -> Result<Self> {
        let labels: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        Mechanism::new(&self.child, &labels, MechanismKind::Constant { category }, Vec::new(), 0)
    }
}

/// Dummies for levels 1.. of each discrete parent, the raw value of each
/// continuous one.
pub(crate) fn parent_features(parents: &[ParentInfo]) -> Result<Vec<Feature>> {
    let mut features = Vec::new();
    for (i, p) in parents.iter().enumerate() {
        if p.is_discrete() {
            if p.labels.len() < 2 {
                return Err(Error::Structural(format!("parent `{}` needs K ≥ 2", p.name)));
            }
            features.extend((1..p.labels.len()).map(|level| Feature::Level { parent: i, level }));
        } else {
            features.push(Feature::Value { parent: i });
        }
    }
    Ok(features)
}

/// Design row for `features` given one value per parent.
pub(crate) fn encode_row(
    features: &[Feature],
    parents: &[ParentInfo],
    pa: &[ParentValue],
    owner: &str,
) -> Result<Vec<f64>> {
    if pa.len() != parents.len() {
        return Err(Error::Evaluation(format!(
            "`{owner}` expects {} parent values, got {}",
            parents.len(),
            pa.len()
        )));
    }
    for (info, v) in parents.iter().zip(pa) {
        let ok = match v {
            ParentValue::Category(c) => info.is_discrete() && *c < info.labels.len(),
            ParentValue::Probs(p) => info.is_discrete() && p.len() == info.labels.len(),
            ParentValue::Real(x) => !info.is_discrete() && x.is_finite(),
        };
        if !ok {
            return Err(Error::Evaluation(format!(
                "invalid value {v:?} for parent `{}` of `{owner}`",
                info.name
            )));
        }
    }
    Ok(features
        .iter()
        .map(|f| match *f {
            Feature::Intercept => 1.0,
            Feature::Level { parent, level } => match &pa[parent] {
                ParentValue::Category(c) => f64::from(u8::from(*c == level)),
                ParentValue::Probs(p) => p[level],
                ParentValue::Real(_) => unreachable!(),
            },
            Feature::Value { parent } => match pa[parent] {
                ParentValue::Real(x) => x,
                _ => unreachable!(),
            },
        })
        .collect())
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate().skip(1) {
        if x > p[best] {
            best = i;
        }
    }
    best
}

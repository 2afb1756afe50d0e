use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Categorical,
    Ordinal,
    Continuous,
}

/// Ties an alternative-specific attribute to one alternative of a choice
/// variable: the attribute then enters only that alternative's utility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AltRef {
    pub variable: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VarKind,
    /// Category labels in order; their count is K.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    /// May never receive parents (feeds background knowledge).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exogenous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<AltRef>,
    /// Raw values are numeric and get cut at these thresholds on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaks: Option<Vec<f64>>,
    /// Raw values are numeric and get cut into this many Jenks classes on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jenks: Option<usize>,
}

impl VariableSpec {
    pub fn categorical(name: &str, labels: &[&str]) -> Self {
        Self::discrete(name, VarKind::Categorical, labels)
    }

    pub fn ordinal(name: &str, labels: &[&str]) -> Self {
        Self::discrete(name, VarKind::Ordinal, labels)
    }

    fn discrete(name: &str, kind: VarKind, labels: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            exogenous: false,
            alternative: None,
            breaks: None,
            jenks: None,
        }
    }

    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: VarKind::Continuous,
            labels: Vec::new(),
            exogenous: false,
            alternative: None,
            breaks: None,
            jenks: None,
        }
    }

    pub fn exogenous(mut self) -> Self {
        self.exogenous = true;
        self
    }

    pub fn attached_to(mut self, variable: &str, category: &str) -> Self {
        self.alternative = Some(AltRef {
            variable: variable.into(),
            category: category.into(),
        });
        self
    }

    pub fn is_discrete(&self) -> bool {
        self.kind != VarKind::Continuous
    }

    /// Number of categories; 0 for continuous variables.
    pub fn cardinality(&self) -> usize {
        if self.is_discrete() {
            self.labels.len()
        } else {
            0
        }
    }

    pub fn label(&self, category: usize) -> &str {
        &self.labels[category]
    }

    pub fn category_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Fill in default labels for discretised variables and check invariants.
    pub fn normalized(mut self) -> Result<Self> {
        let bad = |m: String| Error::Config(format!("variable `{}`: {m}", self.name));
        if self.name.trim().is_empty() {
            return Err(Error::Config("variable with empty name".into()));
        }
        if self.breaks.is_some() || self.jenks.is_some() {
            if self.kind == VarKind::Continuous {
                return Err(bad("continuous variables cannot carry breaks".into()));
            }
            let k = match (&self.breaks, self.jenks) {
                (Some(_), Some(_)) => return Err(bad("give either breaks or jenks, not both".into())),
                (Some(b), None) => {
                    if b.windows(2).any(|w| !(w[0] < w[1])) {
                        return Err(bad("breaks must be strictly increasing".into()));
                    }
                    b.len() + 1
                }
                (None, Some(k)) => k,
                (None, None) => unreachable!(),
            };
            if self.labels.is_empty() {
                self.labels = (1..=k).map(|i| i.to_string()).collect();
            } else if self.labels.len() != k {
                return Err(bad(format!("{} labels for {k} classes", self.labels.len())));
            }
        }
        if self.is_discrete() {
            if self.labels.len() < 2 {
                return Err(bad("discrete variables need at least two categories".into()));
            }
            let unique: BTreeSet<&String> = self.labels.iter().collect();
            if unique.len() != self.labels.len() {
                return Err(bad("category labels must be unique".into()));
            }
        } else if !self.labels.is_empty() {
            return Err(bad("continuous variables take no labels".into()));
        }
        Ok(self)
    }
}

/// The on-disk specification file: a TOML array of `[[variable]]` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecSet {
    #[serde(default)]
    pub variable: Vec<VariableSpec>,
}

impl SpecSet {
    pub fn new(variable: Vec<VariableSpec>) -> Self {
        Self { variable }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let set: SpecSet =
            toml::from_str(text).map_err(|e| Error::format("variable specification", e.to_string()))?;
        set.validated()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("specs serialise")
    }

    pub fn validated(self) -> Result<Self> {
        let mut names = BTreeSet::new();
        let mut out = Vec::with_capacity(self.variable.len());
        for v in self.variable {
            if !names.insert(v.name.clone()) {
                return Err(Error::Config(format!("variable `{}` declared twice", v.name)));
            }
            out.push(v.normalized()?);
        }
        Ok(Self { variable: out })
    }

    pub fn get(&self, name: &str) -> Option<&VariableSpec> {
        self.variable.iter().find(|v| v.name == name)
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::CausalDag;
use crate::error::{Error, Result};

/// Background knowledge constraining which edges a DAG may contain.
///
/// Edges and variables are kept by name so one knowledge file can be applied
/// to graphs with different variable orders.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Knowledge {
    pub forbidden: BTreeSet<(String, String)>,
    pub required: BTreeSet<(String, String)>,
    /// variable → tier; edges may not run from a later tier to an earlier one.
    pub tiers: BTreeMap<String, u32>,
    /// Variables that must stay parentless.
    pub exogenous: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Forbidden { from: String, to: String },
    MissingRequired { from: String, to: String },
    TierReversed { from: String, to: String },
    ExogenousHasParent { variable: String, parent: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Forbidden { from, to } => write!(f, "forbidden edge {from} -> {to} present"),
            Violation::MissingRequired { from, to } => {
                write!(f, "required edge {from} -> {to} missing")
            }
            Violation::TierReversed { from, to } => {
                write!(f, "edge {from} -> {to} runs from a later tier to an earlier one")
            }
            Violation::ExogenousHasParent { variable, parent } => {
                write!(f, "exogenous variable {variable} has parent {parent}")
            }
        }
    }
}

fn split_list(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from)
}

fn split_edge(s: &str) -> Option<(String, String)> {
    let (a, b) = s.split_once("->")?;
    let (a, b) = (a.trim(), b.trim());
    (!a.is_empty() && !b.is_empty()).then(|| (a.to_string(), b.to_string()))
}

impl Knowledge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forbid(mut self, from: &str, to: &str) -> Self {
        self.forbidden.insert((from.into(), to.into()));
        self
    }

    pub fn require(mut self, from: &str, to: &str) -> Self {
        self.required.insert((from.into(), to.into()));
        self
    }

    pub fn tier(mut self, tier: u32, vars: &[&str]) -> Self {
        for v in vars {
            self.tiers.insert((*v).into(), tier);
        }
        self
    }

    pub fn exogenous(mut self, vars: &[&str]) -> Self {
        self.exogenous.extend(vars.iter().map(|v| v.to_string()));
        self
    }

    /// Parse the line format:
    /// `forbid A -> B`, `require A -> B`, `tier N: A, B`, `exogenous: A, B`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut k = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::format("knowledge file", format!("line {}: `{}`", lineno + 1, raw.trim()));
            if let Some(rest) = line.strip_prefix("forbid ") {
                k.forbidden.insert(split_edge(rest).ok_or_else(bad)?);
            } else if let Some(rest) = line.strip_prefix("require ") {
                k.required.insert(split_edge(rest).ok_or_else(bad)?);
            } else if let Some(rest) = line.strip_prefix("tier ") {
                let (n, vars) = rest.split_once(':').ok_or_else(bad)?;
                let n: u32 = n.trim().parse().map_err(|_| bad())?;
                for v in split_list(vars) {
                    if k.tiers.insert(v.clone(), n).is_some_and(|old| old != n) {
                        return Err(Error::Knowledge(format!("`{v}` assigned to two tiers")));
                    }
                }
            } else if let Some(rest) = line.strip_prefix("exogenous:") {
                k.exogenous.extend(split_list(rest));
            } else {
                return Err(bad());
            }
        }
        Ok(k)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.forbidden {
            out.push_str(&format!("forbid {a} -> {b}\n"));
        }
        for (a, b) in &self.required {
            out.push_str(&format!("require {a} -> {b}\n"));
        }
        let mut by_tier: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
        for (v, t) in &self.tiers {
            by_tier.entry(*t).or_default().push(v);
        }
        for (t, vars) in by_tier {
            out.push_str(&format!("tier {t}: {}\n", vars.join(", ")));
        }
        if !self.exogenous.is_empty() {
            let vars: Vec<&str> = self.exogenous.iter().map(String::as_str).collect();
            out.push_str(&format!("exogenous: {}\n", vars.join(", ")));
        }
        out
    }

    /// Whether `from → to` may appear in a graph.
    pub fn allows(&self, from: &str, to: &str) -> bool {
        if self.exogenous.contains(to) {
            return false;
        }
        if self.forbidden.contains(&(from.to_string(), to.to_string())) {
            return false;
        }
        match (self.tiers.get(from), self.tiers.get(to)) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        }
    }

    pub fn is_required(&self, from: &str, to: &str) -> bool {
        self.required.contains(&(from.to_string(), to.to_string()))
    }

    /// Internal consistency against a variable set: names exist, required
    /// and forbidden are disjoint, required edges are themselves allowed and
    /// acyclic, tiers are total or absent.
    pub fn validate(&self, dag: &CausalDag) -> Result<()> {
        let known = |v: &str| dag.index_of(v).map(|_| ());
        for (a, b) in self.forbidden.iter().chain(&self.required) {
            known(a)?;
            known(b)?;
        }
        for v in self.tiers.keys().chain(&self.exogenous) {
            known(v)?;
        }
        if let Some((a, b)) = self.required.intersection(&self.forbidden).next() {
            return Err(Error::Knowledge(format!("{a} -> {b} is both required and forbidden")));
        }
        if !self.tiers.is_empty() && self.tiers.len() != dag.len() {
            let missing: Vec<&str> = dag
                .names()
                .iter()
                .filter(|n| !self.tiers.contains_key(*n))
                .map(String::as_str)
                .collect();
            return Err(Error::Knowledge(format!(
                "tier assignment must cover every variable; missing {}",
                missing.join(", ")
            )));
        }
        let mut probe = CausalDag::new(dag.names())?;
        for (a, b) in &self.required {
            if !self.allows(a, b) {
                return Err(Error::Knowledge(format!(
                    "required edge {a} -> {b} contradicts tiers or exogeneity"
                )));
            }
            probe
                .add_edge_by_name(a, b)
                .map_err(|_| Error::Knowledge(format!("required edges form a cycle through {a} -> {b}")))?;
        }
        Ok(())
    }

    /// Every way `dag` disagrees with this knowledge.
    pub fn check(&self, dag: &CausalDag) -> Vec<Violation> {
        let mut out = Vec::new();
        for (a, b) in dag.edges() {
            let (from, to) = (dag.name(a).to_string(), dag.name(b).to_string());
            if self.forbidden.contains(&(from.clone(), to.clone())) {
                out.push(Violation::Forbidden { from: from.clone(), to: to.clone() });
            }
            if let (Some(ta), Some(tb)) = (self.tiers.get(&from), self.tiers.get(&to)) {
                if ta > tb {
                    out.push(Violation::TierReversed { from: from.clone(), to: to.clone() });
                }
            }
            if self.exogenous.contains(&to) {
                out.push(Violation::ExogenousHasParent { variable: to, parent: from });
            }
        }
        for (a, b) in &self.required {
            let present = match (dag.index_of(a), dag.index_of(b)) {
                (Ok(x), Ok(y)) => dag.has_edge(x, y),
                _ => false,
            };
            if !present {
                out.push(Violation::MissingRequired { from: a.clone(), to: b.clone() });
            }
        }
        out
    }
}

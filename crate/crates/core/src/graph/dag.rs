use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// A directed acyclic graph over an ordered list of named variables.
///
/// Every mutation keeps the graph acyclic: an edge that would close a cycle
/// is rejected and the graph is left untouched.
#[derive(Debug, Default)]
pub struct CausalDag {
    names: Vec<String>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
    // descendants[v][u] == true iff u is reachable from v by a directed path
    // (v itself excluded). Built on first use, dropped on mutation.
    descendants: OnceLock<Vec<Vec<bool>>>,
}

impl Clone for CausalDag {
    fn clone(&self) -> Self {
        Self {
            names: self.names.clone(),
            parents: self.parents.clone(),
            children: self.children.clone(),
            descendants: OnceLock::new(),
        }
    }
}

impl PartialEq for CausalDag {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.parents == other.parents
    }
}

impl Eq for CausalDag {}

impl CausalDag {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut dag = Self::default();
        for n in names {
            dag.add_variable(n.as_ref())?;
        }
        Ok(dag)
    }

    /// Build from variable names and `(from, to)` edges given by name.
    pub fn from_edges<S: AsRef<str>>(names: &[S], edges: &[(&str, &str)]) -> Result<Self> {
        let mut dag = Self::new(names)?;
        for (a, b) in edges {
            dag.add_edge_by_name(a, b)?;
        }
        Ok(dag)
    }

    pub fn add_variable(&mut self, name: &str) -> Result<usize> {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Graph("empty variable name".into()));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Graph(format!("duplicate variable `{name}`")));
        }
        self.names.push(name.to_string());
        self.parents.push(BTreeSet::new());
        self.children.push(BTreeSet::new());
        self.descendants = OnceLock::new();
        Ok(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownVariable(format!("#{v}")))
        }
    }

    pub fn parents(&self, v: usize) -> &BTreeSet<usize> {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &BTreeSet<usize> {
        &self.children[v]
    }

    /// Parents of the variable called `name`; an empty set marks a root.
    pub fn parents_of(&self, name: &str) -> Result<BTreeSet<String>> {
        let v = self.index_of(name)?;
        Ok(self.parents[v].iter().map(|&p| self.names[p].clone()).collect())
    }

    pub fn is_root(&self, v: usize) -> bool {
        self.parents[v].is_empty()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.children[from].contains(&to)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// All edges in `(from, to)` order, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (from, ch) in self.children.iter().enumerate() {
            for &to in ch {
                out.push((from, to));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(BTreeSet::len).sum()
    }

    /// True iff `to` is reachable from `from` along directed edges.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Whether inserting `from → to` would keep the graph acyclic.
    pub fn can_add_edge(&self, from: usize, to: usize) -> bool {
        from != to
            && from < self.len()
            && to < self.len()
            && !self.has_edge(from, to)
            && !self.reaches(to, from)
    }

    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<()> {
        self.check(from)?;
        self.check(to)?;
        if from == to {
            return Err(Error::Graph(format!("self-loop on `{}`", self.names[from])));
        }
        if self.has_edge(from, to) {
            return Ok(());
        }
        if self.reaches(to, from) {
            return Err(Error::Graph(format!(
                "edge {} -> {} would create a directed cycle",
                self.names[from], self.names[to]
            )));
        }
        self.children[from].insert(to);
        self.parents[to].insert(from);
        self.descendants = OnceLock::new();
        Ok(())
    }

    pub fn add_edge_by_name(&mut self, from: &str, to: &str) -> Result<()> {
        let a = self.index_of(from)?;
        let b = self.index_of(to)?;
        self.add_edge(a, b)
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> bool {
        let removed = self.children[from].remove(&to);
        if removed {
            self.parents[to].remove(&from);
            self.descendants = OnceLock::new();
        }
        removed
    }

    /// Reverse `from → to`; rejected (graph unchanged) if it would close a cycle.
    pub fn reverse_edge(&mut self, from: usize, to: usize) -> Result<()> {
        if !self.has_edge(from, to) {
            return Err(Error::Graph(format!(
                "no edge {} -> {} to reverse",
                self.names[from], self.names[to]
            )));
        }
        self.remove_edge(from, to);
        if let Err(e) = self.add_edge(to, from) {
            self.children[from].insert(to);
            self.parents[to].insert(from);
            return Err(e);
        }
        Ok(())
    }

    /// Drop every edge into `v`.
    pub fn clear_parents(&mut self, v: usize) {
        for p in std::mem::take(&mut self.parents[v]) {
            self.children[p].remove(&v);
        }
        self.descendants = OnceLock::new();
    }

    fn closure(&self) -> &Vec<Vec<bool>> {
        self.descendants.get_or_init(|| {
            let n = self.len();
            let mut out = vec![vec![false; n]; n];
            for (v, row) in out.iter_mut().enumerate() {
                let mut stack: Vec<usize> = self.children[v].iter().copied().collect();
                while let Some(u) = stack.pop() {
                    if !row[u] {
                        row[u] = true;
                        stack.extend(self.children[u].iter().copied());
                    }
                }
            }
            out
        })
    }

    /// Strict descendants of `v`.
    pub fn is_descendant(&self, v: usize, u: usize) -> bool {
        self.closure()[v][u]
    }

    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        self.closure()[v]
            .iter()
            .enumerate()
            .filter_map(|(u, &d)| d.then_some(u))
            .collect()
    }

    /// Deterministic topological order (Kahn, smallest index first).
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(BTreeSet::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    /// The endogenous variables needed to evaluate `outcome`, parents first.
    ///
    /// Starting from the outcome, walk back through parents that themselves
    /// have parents; roots are observed inputs and are not part of the list.
    pub fn mechanism_sequence(&self, outcome: usize) -> Result<Vec<usize>> {
        self.check(outcome)?;
        if self.is_root(outcome) {
            return Ok(Vec::new());
        }
        let mut visited = vec![false; self.len()];
        let mut queue = VecDeque::from([outcome]);
        visited[outcome] = true;
        while let Some(v) = queue.pop_front() {
            for &p in &self.parents[v] {
                if !self.is_root(p) && !visited[p] {
                    visited[p] = true;
                    queue.push_back(p);
                }
            }
        }
        Ok(self
            .topological_order()
            .into_iter()
            .filter(|&v| visited[v])
            .collect())
    }

    pub fn mechanism_sequence_by_name(&self, outcome: &str) -> Result<Vec<String>> {
        let seq = self.mechanism_sequence(self.index_of(outcome)?)?;
        Ok(seq.into_iter().map(|v| self.names[v].clone()).collect())
    }

    /// Plain-text exchange form: one `A -> B` per line, isolated variables
    /// on a line of their own.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{} -> {}", self.names[a], self.names[b]);
        }
        for v in 0..self.len() {
            if self.parents[v].is_empty() && self.children[v].is_empty() {
                let _ = writeln!(out, "{}", self.names[v]);
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dag = Self::default();
        let intern = |dag: &mut Self, name: &str| -> Result<usize> {
            match dag.index_of(name.trim()) {
                Ok(i) => Ok(i),
                Err(_) => dag.add_variable(name),
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once("->") {
                Some((a, b)) => {
                    let (a, b) = (a.trim(), b.trim());
                    if a.is_empty() || b.is_empty() {
                        return Err(Error::format("DAG file", format!("line {}: `{raw}`", lineno + 1)));
                    }
                    let a = intern(&mut dag, a)?;
                    let b = intern(&mut dag, b)?;
                    dag.add_edge(a, b).map_err(|e| {
                        Error::format("DAG file", format!("line {}: {e}", lineno + 1))
                    })?;
                }
                None => {
                    intern(&mut dag, line)?;
                }
            }
        }
        Ok(dag)
    }

    /// Same variables and edges as `self` with variables listed in `order`
    /// (names absent from `self` become isolated variables).
    pub fn with_variable_order<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let mut dag = Self::new(order)?;
        for (a, b) in self.edges() {
            dag.add_edge_by_name(&self.names[a], &self.names[b])?;
        }
        Ok(dag)
    }
}

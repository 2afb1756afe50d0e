use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::CausalDag;

/// Status of an adjacent pair `(i, j)` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMark {
    /// `i -> j`
    Forward,
    /// `j -> i`
    Backward,
    Undirected,
}

/// A partially directed graph, keyed by unordered index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    names: Vec<String>,
    edges: BTreeMap<(usize, usize), EdgeMark>,
}

impl Pattern {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mark(&self, a: usize, b: usize) -> Option<EdgeMark> {
        let (i, j) = (a.min(b), a.max(b));
        let m = *self.edges.get(&(i, j))?;
        Some(if a <= b { m } else { flip(m) })
    }

    pub fn is_directed(&self, from: usize, to: usize) -> bool {
        self.mark(from, to) == Some(EdgeMark::Forward)
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.mark(a, b) == Some(EdgeMark::Undirected)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.mark(a, b).is_some()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Lines `A -> B` or `A -- B`, sorted by name.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = self
            .edges
            .iter()
            .map(|(&(i, j), m)| {
                let (a, b) = (&self.names[i], &self.names[j]);
                match m {
                    EdgeMark::Forward => format!("{a} -> {b}"),
                    EdgeMark::Backward => format!("{b} -> {a}"),
                    EdgeMark::Undirected if a <= b => format!("{a} -- {b}"),
                    EdgeMark::Undirected => format!("{b} -- {a}"),
                }
            })
            .collect();
        lines.sort();
        let mut out = String::new();
        for l in lines {
            let _ = writeln!(out, "{l}");
        }
        out
    }

    fn set_directed(&mut self, from: usize, to: usize) {
        let key = (from.min(to), from.max(to));
        let mark = if from < to { EdgeMark::Forward } else { EdgeMark::Backward };
        self.edges.insert(key, mark);
    }
}

fn flip(m: EdgeMark) -> EdgeMark {
    match m {
        EdgeMark::Forward => EdgeMark::Backward,
        EdgeMark::Backward => EdgeMark::Forward,
        EdgeMark::Undirected => EdgeMark::Undirected,
    }
}

/// Equivalence-class pattern of a DAG: v-structures, then Meek rules 1-3
/// to closure.
pub fn cpdag_of(dag: &CausalDag) -> Pattern {
    let n = dag.len();
    let mut p = Pattern {
        names: dag.names().to_vec(),
        edges: dag
            .edges()
            .into_iter()
            .map(|(a, b)| ((a.min(b), a.max(b)), EdgeMark::Undirected))
            .collect(),
    };
    for m in 0..n {
        let pa: Vec<usize> = dag.parents(m).iter().copied().collect();
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !dag.adjacent(a, b) {
                    p.set_directed(a, m);
                    p.set_directed(b, m);
                }
            }
        }
    }
    loop {
        let mut changed = false;
        let undirected: Vec<(usize, usize)> = p
            .edges
            .iter()
            .filter(|(_, m)| **m == EdgeMark::Undirected)
            .map(|(&k, _)| k)
            .collect();
        for (i, j) in undirected {
            for (b, c) in [(i, j), (j, i)] {
                if p.is_undirected(b, c) && compelled(&p, n, b, c) {
                    debug_assert!(dag.has_edge(b, c));
                    p.set_directed(b, c);
                    changed = true;
                }
            }
        }
        if !changed {
            return p;
        }
    }
}

/// Whether one of Meek's rules 1-3 orients the undirected edge `b -- c` as `b -> c`.
fn compelled(p: &Pattern, n: usize, b: usize, c: usize) -> bool {
    for a in 0..n {
        if a == b || a == c {
            continue;
        }
        // R1: a -> b -- c, a and c non-adjacent
        if p.is_directed(a, b) && !p.adjacent(a, c) {
            return true;
        }
        // R2: b -> a -> c
        if p.is_directed(b, a) && p.is_directed(a, c) {
            return true;
        }
    }
    // R3: b -- a1 -> c, b -- a2 -> c, a1 and a2 non-adjacent
    let mids: Vec<usize> = (0..n)
        .filter(|&a| a != b && a != c && p.is_undirected(b, a) && p.is_directed(a, c))
        .collect();
    for (x, &a1) in mids.iter().enumerate() {
        for &a2 in &mids[x + 1..] {
            if !p.adjacent(a1, a2) {
                return true;
            }
        }
    }
    false
}

/// Structural Hamming distance: number of unordered pairs whose status
/// (absent, undirected, or directed one way) differs.
pub fn shd(a: &Pattern, b: &Pattern) -> Result<usize> {
    let mut sorted_a = a.names.clone();
    let mut sorted_b = b.names.clone();
    sorted_a.sort();
    sorted_b.sort();
    if sorted_a != sorted_b {
        return Err(Error::Query("patterns are over different variable sets".into()));
    }
    let map: Vec<usize> = a
        .names
        .iter()
        .map(|n| b.names.iter().position(|m| m == n).unwrap())
        .collect();
    let n = a.names.len();
    let mut d = 0;
    for i in 0..n {
        for j in i + 1..n {
            if a.mark(i, j) != b.mark(map[i], map[j]) {
                d += 1;
            }
        }
    }
    Ok(d)
}

use std::fmt::{self, Write as _};

use super::bic::LocalScoreCache;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{CausalDag, Knowledge};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Columns to search over (all discrete columns when `None`).
    pub variables: Option<Vec<String>>,
    /// Cap on parents per variable during the forward phase.
    pub max_parents: usize,
    /// A move is accepted only if it raises the score by more than this.
    pub min_improvement: f64,
    pub reversals: bool,
    pub max_moves: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            variables: None,
            max_parents: 6,
            min_improvement: 1e-9,
            reversals: true,
            max_moves: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Add,
    Delete,
    Reverse,
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoveKind::Add => "add",
            MoveKind::Delete => "delete",
            MoveKind::Reverse => "reverse",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub kind: MoveKind,
    /// The edge as it was before the move (`from -> to`).
    pub from: String,
    pub to: String,
    pub delta: f64,
    /// Inserted because background knowledge requires it, whatever the score.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchTrace {
    pub variables: Vec<String>,
    pub initial_score: f64,
    pub moves: Vec<Move>,
    pub final_score: f64,
}

impl SearchTrace {
    /// Rebuild the final DAG by applying the moves to the empty graph.
    pub fn replay(&self) -> Result<CausalDag> {
        let mut dag = CausalDag::new(&self.variables)?;
        for m in &self.moves {
            let (a, b) = (dag.index_of(&m.from)?, dag.index_of(&m.to)?);
            match m.kind {
                MoveKind::Add => dag.add_edge(a, b)?,
                MoveKind::Delete => {
                    if !dag.remove_edge(a, b) {
                        return Err(Error::Graph(format!("trace deletes absent edge {} -> {}", m.from, m.to)));
                    }
                }
                MoveKind::Reverse => dag.reverse_edge(a, b)?,
            }
        }
        Ok(dag)
    }

    /// Line-oriented log: a header, one line per move, then the final score.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# variables: {}", self.variables.join(", "));
        let _ = writeln!(out, "initial_score {}", self.initial_score);
        for m in &self.moves {
            let _ = writeln!(
                out,
                "{} {} -> {} delta {}{}",
                m.kind,
                m.from,
                m.to,
                m.delta,
                if m.forced { " forced" } else { "" }
            );
        }
        let _ = writeln!(out, "final_score {}", self.final_score);
        out
    }
}

struct Search<'a> {
    dag: CausalDag,
    cols: Vec<usize>,
    knowledge: &'a Knowledge,
    cache: LocalScoreCache<'a>,
    cfg: &'a SearchConfig,
    // variable indices sorted by name, for lexicographic tie-breaking
    by_name: Vec<usize>,
}

impl Search<'_> {
    fn local(&mut self, v: usize, parents: impl Iterator<Item = usize>) -> Result<f64> {
        let pa: Vec<usize> = parents.map(|p| self.cols[p]).collect();
        self.cache.score(self.cols[v], &pa)
    }

    fn current(&mut self, v: usize) -> Result<f64> {
        let pa: Vec<usize> = self.dag.parents(v).iter().copied().collect();
        self.local(v, pa.into_iter())
    }

    fn with_parent(&mut self, v: usize, extra: usize) -> Result<f64> {
        let pa: Vec<usize> = self.dag.parents(v).iter().copied().chain([extra]).collect();
        self.local(v, pa.into_iter())
    }

    fn without_parent(&mut self, v: usize, gone: usize) -> Result<f64> {
        let pa: Vec<usize> = self.dag.parents(v).iter().copied().filter(|&p| p != gone).collect();
        self.local(v, pa.into_iter())
    }

    fn allowed(&self, from: usize, to: usize) -> bool {
        self.knowledge.allows(self.dag.name(from), self.dag.name(to))
    }

    fn required(&self, from: usize, to: usize) -> bool {
        self.knowledge.is_required(self.dag.name(from), self.dag.name(to))
    }

    fn ordered_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &a in &self.by_name {
            for &b in &self.by_name {
                if a != b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Directed path `from ⇝ to` other than the edge `from → to` itself.
    fn other_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.dag.len()];
        let mut stack: Vec<usize> = self.dag.children(from).iter().copied().filter(|&c| c != to).collect();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if !seen[v] {
                seen[v] = true;
                stack.extend(self.dag.children(v).iter().copied());
            }
        }
        false
    }

    fn best(&mut self, kind: MoveKind) -> Result<Option<(usize, usize, f64)>> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, b) in self.ordered_pairs() {
            let delta = match kind {
                MoveKind::Add => {
                    if self.dag.adjacent(a, b)
                        || !self.allowed(a, b)
                        || self.dag.parents(b).len() >= self.cfg.max_parents
                        || !self.dag.can_add_edge(a, b)
                    {
                        continue;
                    }
                    self.with_parent(b, a)? - self.current(b)?
                }
                MoveKind::Delete => {
                    if !self.dag.has_edge(a, b) || self.required(a, b) {
                        continue;
                    }
                    self.without_parent(b, a)? - self.current(b)?
                }
                MoveKind::Reverse => {
                    if !self.dag.has_edge(a, b)
                        || self.required(a, b)
                        || !self.allowed(b, a)
                        || self.dag.parents(a).len() >= self.cfg.max_parents
                        || self.other_path(a, b)
                    {
                        continue;
                    }
                    self.without_parent(b, a)? - self.current(b)? + self.with_parent(a, b)?
                        - self.current(a)?
                }
            };
            if delta > self.cfg.min_improvement && best.is_none_or(|(_, _, d)| delta > d) {
                best = Some((a, b, delta));
            }
        }
        Ok(best)
    }

    fn apply(&mut self, kind: MoveKind, a: usize, b: usize) -> Result<()> {
        match kind {
            MoveKind::Add => self.dag.add_edge(a, b),
            MoveKind::Delete => {
                self.dag.remove_edge(a, b);
                Ok(())
            }
            MoveKind::Reverse => self.dag.reverse_edge(a, b),
        }
    }
}

/// Greedy hill climbing over DAGs maximising total BIC.
///
/// Required edges are inserted first. Then forward (best single addition),
/// backward (best deletion) and, if enabled, reversal phases repeat until a
/// full round changes nothing. Every intermediate graph is acyclic and
/// admissible under `knowledge`; ties go to the lexicographically smallest
/// `(from, to)` pair of names.
pub fn greedy_search(
    data: &Dataset,
    knowledge: &Knowledge,
    cfg: &SearchConfig,
) -> Result<(CausalDag, SearchTrace)> {
    if data.n_rows() == 0 {
        return Err(Error::Config("cannot search structure on an empty dataset".into()));
    }
    let names: Vec<String> = match &cfg.variables {
        Some(v) => v.clone(),
        None => data
            .specs()
            .iter()
            .filter(|s| s.is_discrete())
            .map(|s| s.name.clone())
            .collect(),
    };
    let cols: Vec<usize> = names.iter().map(|n| data.column_index(n)).collect::<Result<_>>()?;
    for &c in &cols {
        data.discrete(c)?;
    }
    let dag = CausalDag::new(&names)?;
    knowledge.validate(&dag)?;
    let mut by_name: Vec<usize> = (0..names.len()).collect();
    by_name.sort_by(|&a, &b| names[a].cmp(&names[b]));

    let mut s = Search {
        dag,
        cols,
        knowledge,
        cache: LocalScoreCache::new(data),
        cfg,
        by_name,
    };
    let mut initial = 0.0;
    for v in 0..names.len() {
        initial += s.current(v)?;
    }
    let mut trace = SearchTrace {
        variables: names.clone(),
        initial_score: initial,
        moves: Vec::new(),
        final_score: initial,
    };
    let mut score = initial;

    for (from, to) in &knowledge.required {
        let (a, b) = (s.dag.index_of(from)?, s.dag.index_of(to)?);
        let delta = s.with_parent(b, a)? - s.current(b)?;
        s.dag.add_edge(a, b).map_err(|e| Error::Knowledge(e.to_string()))?;
        score += delta;
        trace.moves.push(Move {
            kind: MoveKind::Add,
            from: from.clone(),
            to: to.clone(),
            delta,
            forced: true,
        });
    }

    let mut phases = vec![MoveKind::Add, MoveKind::Delete];
    if cfg.reversals {
        phases.push(MoveKind::Reverse);
    }
    let mut moved = true;
    while moved {
        moved = false;
        for &kind in &phases {
            while let Some((a, b, delta)) = s.best(kind)? {
                if trace.moves.len() >= cfg.max_moves {
                    return Err(Error::Numeric(format!(
                        "structure search exceeded {} moves",
                        cfg.max_moves
                    )));
                }
                s.apply(kind, a, b)?;
                score += delta;
                trace.moves.push(Move {
                    kind,
                    from: names[a].clone(),
                    to: names[b].clone(),
                    delta,
                    forced: false,
                });
                moved = true;
            }
        }
    }
    trace.final_score = score;
    Ok((s.dag, trace))
}

use std::collections::{BTreeSet, VecDeque};

use super::CausalDag;
use crate::error::{Error, Result};

/// Shape of a consecutive triple `a – m – b` on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triple {
    /// `a → m → b` or `a ← m ← b`
    Chain,
    /// `a ← m → b`
    Fork,
    /// `a → m ← b`
    Collider,
    /// not a triple of the graph
    None,
}

/// Conditioning set `z` for a separation query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockingSet {
    members: BTreeSet<usize>,
}

impl BlockingSet {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        Self {
            members: members.into_iter().collect(),
        }
    }

    pub fn from_names<S: AsRef<str>>(dag: &CausalDag, names: &[S]) -> Result<Self> {
        names
            .iter()
            .map(|n| dag.index_of(n.as_ref()))
            .collect::<Result<BTreeSet<_>>>()
            .map(|members| Self { members })
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.contains(&v)
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Largest graph answered by explicit path enumeration in [`CausalDag::d_separated`].
const ENUMERATION_LIMIT: usize = 12;

impl CausalDag {
    /// Classify the triple; [`Triple::None`] when `a, m, b` are distinct but
    /// not both adjacent to `m`.
    pub fn triple_kind(&self, a: usize, m: usize, b: usize) -> Triple {
        let into_m_from_a = self.has_edge(a, m);
        let out_m_to_a = self.has_edge(m, a);
        let into_m_from_b = self.has_edge(b, m);
        let out_m_to_b = self.has_edge(m, b);
        match (into_m_from_a, out_m_to_a, into_m_from_b, out_m_to_b) {
            (true, _, true, _) => Triple::Collider,
            (_, true, _, true) => Triple::Fork,
            (true, _, _, true) | (_, true, true, _) => Triple::Chain,
            _ => Triple::None,
        }
    }

    pub fn classify_triple(&self, a: usize, m: usize, b: usize) -> Result<Triple> {
        for v in [a, m, b] {
            if v >= self.len() {
                return Err(Error::UnknownVariable(format!("#{v}")));
            }
        }
        if a == m || m == b || a == b {
            return Err(Error::Query("triple vertices must be distinct".into()));
        }
        match self.triple_kind(a, m, b) {
            Triple::None => Err(Error::Query(format!(
                "{} – {} – {} is not a path of the graph",
                self.name(a),
                self.name(m),
                self.name(b)
            ))),
            t => Ok(t),
        }
    }

    fn validate_path(&self, path: &[usize]) -> Result<()> {
        if path.len() < 2 {
            return Err(Error::Query("a path needs at least two vertices".into()));
        }
        let mut seen = BTreeSet::new();
        for &v in path {
            if v >= self.len() {
                return Err(Error::UnknownVariable(format!("#{v}")));
            }
            if !seen.insert(v) {
                return Err(Error::Query(format!("path revisits `{}`", self.name(v))));
            }
        }
        for w in path.windows(2) {
            if !self.adjacent(w[0], w[1]) {
                return Err(Error::Query(format!(
                    "`{}` and `{}` are not adjacent",
                    self.name(w[0]),
                    self.name(w[1])
                )));
            }
        }
        Ok(())
    }

    fn blocked_unchecked(&self, path: &[usize], z: &BlockingSet) -> bool {
        path.windows(3).any(|w| match self.triple_kind(w[0], w[1], w[2]) {
            Triple::Chain | Triple::Fork => z.contains(w[1]),
            Triple::Collider => {
                !z.contains(w[1]) && !z.members().iter().any(|&d| self.is_descendant(w[1], d))
            }
            Triple::None => unreachable!("validated path"),
        })
    }

    /// Whether `z` blocks the undirected path `path`.
    pub fn path_blocked(&self, path: &[usize], z: &BlockingSet) -> Result<bool> {
        self.validate_path(path)?;
        Ok(self.blocked_unchecked(path, z))
    }

    /// Every simple undirected path between `x` and `y`.
    pub fn undirected_paths(&self, x: usize, y: usize) -> Vec<Vec<usize>> {
        fn walk(
            dag: &CausalDag,
            target: usize,
            path: &mut Vec<usize>,
            on_path: &mut [bool],
            out: &mut Vec<Vec<usize>>,
        ) {
            let v = *path.last().expect("non-empty");
            if v == target {
                out.push(path.clone());
                return;
            }
            let neighbours: BTreeSet<usize> = dag
                .parents(v)
                .iter()
                .chain(dag.children(v))
                .copied()
                .collect();
            for u in neighbours {
                if !on_path[u] {
                    on_path[u] = true;
                    path.push(u);
                    walk(dag, target, path, on_path, out);
                    path.pop();
                    on_path[u] = false;
                }
            }
        }
        let mut out = Vec::new();
        let mut on_path = vec![false; self.len()];
        on_path[x] = true;
        walk(self, y, &mut vec![x], &mut on_path, &mut out);
        out
    }

    fn check_query(&self, x: usize, y: usize, z: &BlockingSet) -> Result<()> {
        for v in [x, y].iter().chain(z.members()) {
            if *v >= self.len() {
                return Err(Error::UnknownVariable(format!("#{v}")));
            }
        }
        if x == y {
            return Err(Error::Query("separation endpoints must differ".into()));
        }
        if z.contains(x) || z.contains(y) {
            return Err(Error::Query("an endpoint is in the conditioning set".into()));
        }
        Ok(())
    }

    /// d-separation by enumerating every undirected path.
    pub fn d_separated_by_paths(&self, x: usize, y: usize, z: &BlockingSet) -> Result<bool> {
        self.check_query(x, y, z)?;
        Ok(self
            .undirected_paths(x, y)
            .iter()
            .all(|p| self.blocked_unchecked(p, z)))
    }

    /// d-separation by active-trail reachability ("Bayes ball").
    pub fn d_separated_by_reachability(&self, x: usize, y: usize, z: &BlockingSet) -> Result<bool> {
        self.check_query(x, y, z)?;
        let n = self.len();
        // Vertices that are in z or have a descendant in z.
        let mut opens_collider = vec![false; n];
        let mut stack: Vec<usize> = z.members().iter().copied().collect();
        while let Some(v) = stack.pop() {
            if !opens_collider[v] {
                opens_collider[v] = true;
                stack.extend(self.parents(v).iter().copied());
            }
        }
        // State: (vertex, arrived travelling along an edge into it from a child = "up")
        const UP: usize = 0;
        const DOWN: usize = 1;
        let mut seen = vec![[false; 2]; n];
        let mut queue = VecDeque::from([(x, UP)]);
        while let Some((v, dir)) = queue.pop_front() {
            if seen[v][dir] {
                continue;
            }
            seen[v][dir] = true;
            if v == y {
                return Ok(false);
            }
            let in_z = z.contains(v);
            if dir == UP && !in_z {
                for &p in self.parents(v) {
                    queue.push_back((p, UP));
                }
                for &c in self.children(v) {
                    queue.push_back((c, DOWN));
                }
            } else if dir == DOWN {
                if !in_z {
                    for &c in self.children(v) {
                        queue.push_back((c, DOWN));
                    }
                }
                if opens_collider[v] {
                    for &p in self.parents(v) {
                        queue.push_back((p, UP));
                    }
                }
            }
        }
        Ok(true)
    }

    /// True iff every path between `x` and `y` is blocked by `z`.
    pub fn d_separated(&self, x: usize, y: usize, z: &BlockingSet) -> Result<bool> {
        if self.len() <= ENUMERATION_LIMIT {
            self.d_separated_by_paths(x, y, z)
        } else {
            self.d_separated_by_reachability(x, y, z)
        }
    }

    pub fn d_separated_by_name<S: AsRef<str>>(&self, x: &str, y: &str, z: &[S]) -> Result<bool> {
        let z = BlockingSet::from_names(self, z)?;
        self.d_separated(self.index_of(x)?, self.index_of(y)?, &z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(edges: &[(&str, &str)]) -> CausalDag {
        CausalDag::from_edges(&["A", "M", "B"], edges).unwrap()
    }

    #[test]
    fn triples() {
        assert_eq!(dag(&[("A", "M"), ("M", "B")]).classify_triple(0, 1, 2).unwrap(), Triple::Chain);
        assert_eq!(dag(&[("M", "A"), ("B", "M")]).classify_triple(0, 1, 2).unwrap(), Triple::Chain);
        assert_eq!(dag(&[("M", "A"), ("M", "B")]).classify_triple(0, 1, 2).unwrap(), Triple::Fork);
        assert_eq!(dag(&[("A", "M"), ("B", "M")]).classify_triple(0, 1, 2).unwrap(), Triple::Collider);
        assert!(matches!(dag(&[("A", "M")]).classify_triple(0, 1, 2), Err(Error::Query(_))));
    }

    #[test]
    fn blocking_rules() {
        let chain = dag(&[("A", "M"), ("M", "B")]);
        assert!(chain.path_blocked(&[0, 1, 2], &BlockingSet::new([1])).unwrap());
        assert!(!chain.path_blocked(&[0, 1, 2], &BlockingSet::default()).unwrap());
        let col = dag(&[("A", "M"), ("B", "M")]);
        assert!(col.path_blocked(&[0, 1, 2], &BlockingSet::default()).unwrap());
        assert!(!col.path_blocked(&[0, 1, 2], &BlockingSet::new([1])).unwrap());
        assert!(col.path_blocked(&[0, 2], &BlockingSet::default()).is_err());
    }

    #[test]
    fn collider_opened_by_descendant() {
        let d = CausalDag::from_edges(&["A", "M", "B", "D"], &[("A", "M"), ("B", "M"), ("M", "D")])
            .unwrap();
        assert!(d.d_separated_by_name("A", "B", &[] as &[&str]).unwrap());
        assert!(!d.d_separated_by_name("A", "B", &["D"]).unwrap());
        assert!(!d.d_separated_by_reachability(0, 2, &BlockingSet::new([3])).unwrap());
    }

    #[test]
    fn separation_examples() {
        let chain = dag(&[("A", "M"), ("M", "B")]);
        assert!(chain.d_separated_by_name("A", "B", &["M"]).unwrap());
        let fork = dag(&[("M", "A"), ("M", "B")]);
        assert!(!fork.d_separated_by_name("A", "B", &[] as &[&str]).unwrap());
        assert!(fork.d_separated_by_name("A", "B", &["M"]).unwrap());
        assert!(matches!(
            fork.d_separated_by_name("A", "B", &["A"]),
            Err(Error::Query(_))
        ));
        assert!(fork.d_separated(0, 0, &BlockingSet::default()).is_err());
    }
}

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::activation::{sigmoid_unchecked, softplus_unchecked};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
}

#[derive(Debug, Default)]
struct Inner {
    nodes: Vec<Node>,
    // (operand index, local partial) for each node, contiguous per node.
    edges: Vec<(u32, f64)>,
}

/// Wengert list for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every operand index is smaller
/// than the index of the node that consumes it and a single reverse sweep
/// visits each node exactly once. A tape is built per minibatch and dropped.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{} = {})", self.idx, self.value)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: f64, operands: &[(u32, f64)]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let start = inner.edges.len() as u32;
        inner.edges.extend_from_slice(operands);
        let end = inner.edges.len() as u32;
        let idx = inner.nodes.len() as u32;
        inner.nodes.push(Node { start, end });
        Var {
            tape: self,
            idx,
            value,
        }
    }

    /// Leaf variable (a parameter or an input that needs an adjoint).
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(value, &[])
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(value, &[])
    }

    /// Adjoints of every node with respect to `output`.
    fn adjoints(&self, output: &Var<'_>) -> Result<Vec<f64>> {
        if !std::ptr::eq(output.tape, self) {
            return Err(Error::Structural("objective recorded on another tape".into()));
        }
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; output.idx as usize + 1];
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = inner.nodes[i];
            for &(op, partial) in &inner.edges[node.start as usize..node.end as usize] {
                adj[op as usize] += a * partial;
            }
        }
        Ok(adj)
    }

    /// `∂objective/∂p` for every `p` in `params`.
    pub fn gradient(&self, objective: &Var<'_>, params: &[Var<'_>]) -> Result<Vec<f64>> {
        let adj = self.adjoints(objective)?;
        params
            .iter()
            .map(|p| {
                if !std::ptr::eq(p.tape, self) {
                    return Err(Error::Structural(format!(
                        "parameter #{} is not recorded on this tape",
                        p.idx
                    )));
                }
                // Nodes recorded after the objective cannot influence it.
                Ok(adj.get(p.idx as usize).copied().unwrap_or(0.0))
            })
            .collect()
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, value: f64, partial: f64) -> Self {
        self.tape.push(value, &[(self.idx, partial)])
    }

    fn binary(self, other: Var<'t>, value: f64, da: f64, db: f64) -> Self {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "mixing tapes");
        self.tape
            .push(value, &[(self.idx, da), (other.idx, db)])
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }

    pub fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    pub fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    pub fn softplus(self) -> Self {
        self.unary(softplus_unchecked(self.value), sigmoid_unchecked(self.value))
    }

    pub fn sigmoid(self) -> Self {
        let s = sigmoid_unchecked(self.value);
        self.unary(s, s * (1.0 - s))
    }

    pub fn abs(self) -> Self {
        let sign = if self.value < 0.0 { -1.0 } else { 1.0 };
        self.unary(self.value.abs(), sign)
    }

    pub fn square(self) -> Self {
        self.unary(self.value * self.value, 2.0 * self.value)
    }

    /// `Σ w_i x_i` with constant `x`, recorded as one node.
    pub fn dot_const(w: &[Var<'t>], x: &[f64]) -> Self {
        assert!(!w.is_empty() && w.len() == x.len(), "dot_const shape");
        let mut value = 0.0;
        for (wi, &xi) in w.iter().zip(x) {
            value += wi.value * xi;
        }
        let ops: Vec<(u32, f64)> = w.iter().zip(x).map(|(wi, &xi)| (wi.idx, xi)).collect();
        w[0].tape.push(value, &ops)
    }

    /// `Σ w_i x_i` with both sides recorded, as one node.
    pub fn dot(w: &[Var<'t>], x: &[Var<'t>]) -> Self {
        assert!(!w.is_empty() && w.len() == x.len(), "dot shape");
        let mut value = 0.0;
        let mut ops = Vec::with_capacity(2 * w.len());
        for (wi, xi) in w.iter().zip(x) {
            value += wi.value * xi.value;
            ops.push((wi.idx, xi.value));
            ops.push((xi.idx, wi.value));
        }
        w[0].tape.push(value, &ops)
    }

    pub fn sum(xs: &[Var<'t>]) -> Self {
        assert!(!xs.is_empty(), "sum of nothing");
        let mut value = 0.0;
        for x in xs {
            value += x.value;
        }
        let ops: Vec<(u32, f64)> = xs.iter().map(|x| (x.idx, 1.0)).collect();
        xs[0].tape.push(value, &ops)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let tape = Tape::new();
        let p = tape.var(3.0);
        let f = p * p;
        assert_eq!(tape.gradient(&f, &[p]).unwrap(), vec![6.0]);
    }

    #[test]
    fn softplus_derivative_at_zero() {
        let tape = Tape::new();
        let p = tape.var(0.0);
        let f = p.softplus();
        assert_eq!(tape.gradient(&f, &[p]).unwrap(), vec![0.5]);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let y = x * 3.0;
        let f = y * y + y; // 9x² + 3x
        let g = tape.gradient(&f, &[x]).unwrap();
        assert!((g[0] - (18.0 * 2.0 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn foreign_parameter_is_rejected() {
        let a = Tape::new();
        let b = Tape::new();
        let p = a.var(1.0);
        let q = b.var(1.0);
        let f = p * 2.0;
        assert!(matches!(a.gradient(&f, &[q]), Err(Error::Structural(_))));
        assert!(matches!(b.gradient(&f, &[q]), Err(Error::Structural(_))));
    }

    #[test]
    fn nary_nodes_match_binary_chain() {
        let tape = Tape::new();
        let w = tape.vars(&[0.5, -1.5, 2.0]);
        let x = tape.vars(&[1.0, 2.0, -0.25]);
        let d = Var::dot(&w, &x);
        let g = tape.gradient(&d, &w).unwrap();
        assert_eq!(g, vec![1.0, 2.0, -0.25]);
        let gx = tape.gradient(&d, &x).unwrap();
        assert_eq!(gx, vec![0.5, -1.5, 2.0]);
        let s = Var::sum(&w);
        assert_eq!(tape.gradient(&s, &w).unwrap(), vec![1.0; 3]);
    }
}

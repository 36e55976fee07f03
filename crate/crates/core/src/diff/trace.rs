use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use super::Scalar;
use crate::networks::spline::SplineGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("replay mismatch at node {node}: cached {cached:e}, replayed {replayed:e}")]
    ReplayMismatch {
        node: usize,
        cached: f64,
        replayed: f64,
    },
}

/// Elementary operation recorded on a [`Trace`]. Operands always refer to
/// earlier nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Input,
    Const,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Exp(u32),
    Ln(u32),
    Sin(u32),
    Cos(u32),
    Tanh(u32),
    Powi(u32, i32),
    /// `Σ c_i B_i^{(deriv)}(x)`
    Spline {
        x: u32,
        coeffs: Vec<u32>,
        grid: SplineGrid,
        deriv: u8,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: f64,
}

/// Append-only record of elementary operations with cached forward values.
#[derive(Debug, Default)]
pub struct Trace {
    nodes: RefCell<Vec<Node>>,
}

/// A scalar recorded on a [`Trace`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    trace: &'t Trace,
    idx: u32,
    val: f64,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(Node { op, value });
        Var {
            trace: self,
            idx,
            val: value,
        }
    }

    /// Records an independent variable.
    pub fn input(&self, value: f64) -> Var<'_> {
        self.push(Op::Input, value)
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Op::Const, value)
    }

    /// Reverse sweep from `output`; returns the adjoint of every node.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let val = nodes[i].value;
            let v = |k: &u32| nodes[*k as usize].value;
            match &nodes[i].op {
                Op::Input | Op::Const => {}
                Op::Add(a, b) => {
                    adj[*a as usize] += g;
                    adj[*b as usize] += g;
                }
                Op::Sub(a, b) => {
                    adj[*a as usize] += g;
                    adj[*b as usize] -= g;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (v(a), v(b));
                    adj[*a as usize] += g * vb;
                    adj[*b as usize] += g * va;
                }
                Op::Div(a, b) => {
                    let (va, vb) = (v(a), v(b));
                    adj[*a as usize] += g / vb;
                    adj[*b as usize] -= g * va / (vb * vb);
                }
                Op::Neg(a) => adj[*a as usize] -= g,
                Op::Exp(a) => adj[*a as usize] += g * val,
                Op::Ln(a) => adj[*a as usize] += g / v(a),
                Op::Sin(a) => adj[*a as usize] += g * v(a).cos(),
                Op::Cos(a) => adj[*a as usize] -= g * v(a).sin(),
                Op::Tanh(a) => adj[*a as usize] += g * (1.0 - val * val),
                Op::Powi(a, n) => adj[*a as usize] += g * *n as f64 * v(a).powi(n - 1),
                Op::Spline {
                    x,
                    coeffs,
                    grid,
                    deriv,
                } => {
                    let xv = v(x);
                    let c: Vec<f64> = coeffs.iter().map(v).collect();
                    adj[*x as usize] += g * grid.eval(&c, xv, *deriv as usize + 1);
                    if let Some(lb) = grid.local(xv) {
                        for r in lb.valid() {
                            let k = (lb.first + r as isize) as usize;
                            adj[coeffs[k] as usize] += g * lb.values[*deriv as usize][r];
                        }
                    }
                }
            }
        }
        adj
    }

    /// Gradient of `output` with respect to `inputs`.
    pub fn gradient(&self, output: Var<'_>, inputs: &[Var<'_>]) -> Vec<f64> {
        let adj = self.adjoints(output);
        inputs.iter().map(|v| adj[v.idx as usize]).collect()
    }

    /// Recomputes every node from its operands, returning the replayed values.
    pub fn replay(&self) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut vals: Vec<f64> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let v = |k: &u32| vals[*k as usize];
            let value = match &node.op {
                Op::Input | Op::Const => node.value,
                Op::Add(a, b) => v(a) + v(b),
                Op::Sub(a, b) => v(a) - v(b),
                Op::Mul(a, b) => v(a) * v(b),
                Op::Div(a, b) => v(a) / v(b),
                Op::Neg(a) => -v(a),
                Op::Exp(a) => v(a).exp(),
                Op::Ln(a) => v(a).ln(),
                Op::Sin(a) => v(a).sin(),
                Op::Cos(a) => v(a).cos(),
                Op::Tanh(a) => v(a).tanh(),
                Op::Powi(a, n) => v(a).powi(*n),
                Op::Spline {
                    x,
                    coeffs,
                    grid,
                    deriv,
                } => {
                    let c: Vec<f64> = coeffs.iter().map(v).collect();
                    grid.eval(&c, v(x), *deriv as usize)
                }
            };
            vals.push(value);
        }
        vals
    }

    /// Checks that replaying reproduces the cached values bit for bit.
    pub fn verify_replay(&self) -> Result<(), TraceError> {
        let replayed = self.replay();
        let nodes = self.nodes.borrow();
        for (i, (n, r)) in nodes.iter().zip(&replayed).enumerate() {
            if n.value.to_bits() != r.to_bits() {
                return Err(TraceError::ReplayMismatch {
                    node: i,
                    cached: n.value,
                    replayed: *r,
                });
            }
        }
        Ok(())
    }

    /// Whether every operand precedes its node.
    pub fn is_topologically_ordered(&self) -> bool {
        let nodes = self.nodes.borrow();
        nodes.iter().enumerate().all(|(i, n)| {
            let i = i as u32;
            match &n.op {
                Op::Input | Op::Const => true,
                Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => *a < i && *b < i,
                Op::Neg(a)
                | Op::Exp(a)
                | Op::Ln(a)
                | Op::Sin(a)
                | Op::Cos(a)
                | Op::Tanh(a)
                | Op::Powi(a, _) => *a < i,
                Op::Spline { x, coeffs, .. } => *x < i && coeffs.iter().all(|c| *c < i),
            }
        })
    }
}

/// Value and gradient of `f` at `theta` by one forward recording and one
/// reverse sweep.
pub fn gradient<F>(theta: &[f64], f: F) -> (f64, Vec<f64>)
where
    F: for<'t> FnOnce(&'t Trace, &[Var<'t>]) -> Var<'t>,
{
    let trace = Trace::new();
    let inputs: Vec<Var<'_>> = theta.iter().map(|&t| trace.input(t)).collect();
    let out = f(&trace, &inputs);
    let grad = trace.gradient(out, &inputs);
    (out.val, grad)
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.val
    }

    pub fn index(&self) -> usize {
        self.idx as usize
    }

    fn unary(self, op: Op, value: f64) -> Self {
        self.trace.push(op, value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.trace.push(Op::Add(self.idx, o.idx), self.val + o.val)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.trace.push(Op::Sub(self.idx, o.idx), self.val - o.val)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.trace.push(Op::Mul(self.idx, o.idx), self.val * o.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self.trace.push(Op::Div(self.idx, o.idx), self.val / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg(self.idx), -self.val)
    }
}

impl<'t> Scalar for Var<'t> {
    fn constant(&self, v: f64) -> Self {
        self.trace.constant(v)
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn exp(&self) -> Self {
        self.unary(Op::Exp(self.idx), self.val.exp())
    }
    fn ln(&self) -> Self {
        self.unary(Op::Ln(self.idx), self.val.ln())
    }
    fn sin(&self) -> Self {
        self.unary(Op::Sin(self.idx), self.val.sin())
    }
    fn cos(&self) -> Self {
        self.unary(Op::Cos(self.idx), self.val.cos())
    }
    fn tanh(&self) -> Self {
        self.unary(Op::Tanh(self.idx), self.val.tanh())
    }
    fn powi(&self, n: i32) -> Self {
        self.unary(Op::Powi(self.idx, n), self.val.powi(n))
    }
    fn spline(&self, grid: &SplineGrid, coeffs: &[Self], deriv: usize) -> Self {
        let c: Vec<f64> = coeffs.iter().map(|v| v.val).collect();
        let value = grid.eval(&c, self.val, deriv);
        self.trace.push(
            Op::Spline {
                x: self.idx,
                coeffs: coeffs.iter().map(|v| v.idx).collect(),
                grid: *grid,
                deriv: deriv as u8,
            },
            value,
        )
    }
}

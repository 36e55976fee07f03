//! Differentiation engine.
//!
//! Two layers cooperate:
//!
//! * [`Jet`] carries a value together with its first and second derivatives
//!   with respect to the two spatial inputs (forward-over-forward mode).
//! * [`Trace`] records elementary operations on [`Var`]s and sweeps them in
//!   reverse to obtain gradients with respect to every recorded input.
//!
//! Evaluating a network on `Jet<Var>` therefore produces input derivatives whose
//! parameter gradients come out of a single reverse sweep, including paths that
//! only pass through `u_xx` or `u_yy`. Network code is written once against the
//! [`Scalar`] trait and instantiated for `f64`, `Jet<f64>`, `Var` and `Jet<Var>`.

mod jet;
mod trace;

use std::ops::{Add, Div, Mul, Neg, Sub};

pub use jet::Jet;
pub use trace::{gradient, Op, Trace, TraceError, Var};

use crate::networks::spline::SplineGrid;

/// Arithmetic needed by the network forward passes.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant living in the same context as `self`.
    fn constant(&self, v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tanh(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    /// `Σ c_i B_i^{(deriv)}(self)` on `grid`.
    fn spline(&self, grid: &SplineGrid, coeffs: &[Self], deriv: usize) -> Self;

    /// `x / (1 + e^{-x})`
    fn silu(&self) -> Self {
        let one = self.constant(1.0);
        self.clone() / (one + (-self.clone()).exp())
    }
}

impl Scalar for f64 {
    fn constant(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn spline(&self, grid: &SplineGrid, coeffs: &[Self], deriv: usize) -> Self {
        grid.eval(coeffs, *self, deriv)
    }
}

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalBundle {
    pub u: f64,
    /// `(u_x, u_y)`
    pub grad: [f64; 2],
    /// `(u_xx, u_yy, u_xy)`
    pub hess: [f64; 3],
}

impl EvalBundle {
    pub fn laplacian(&self) -> f64 {
        self.hess[0] + self.hess[1]
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }
}

impl From<Jet<f64>> for EvalBundle {
    fn from(j: Jet<f64>) -> Self {
        Self {
            u: j.v,
            grad: [j.dx, j.dy],
            hess: [j.dxx, j.dyy, j.dxy],
        }
    }
}

/// Evaluates a generic scalar field with its input derivatives at `p`.
pub fn evaluate_with_input_derivatives<F>(field: F, p: [f64; 2]) -> EvalBundle
where
    F: Fn(Jet<f64>, Jet<f64>) -> Jet<f64>,
{
    field(Jet::var_x(p[0]), Jet::var_y(p[1])).into()
}

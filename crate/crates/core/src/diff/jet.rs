use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;
use crate::networks::spline::SplineGrid;

/// Truncated second-order Taylor expansion in the two inputs `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<S> {
    pub v: S,
    pub dx: S,
    pub dy: S,
    pub dxx: S,
    pub dyy: S,
    pub dxy: S,
}

impl<S: Scalar> Jet<S> {
    /// A constant jet (all derivatives zero) built from `v`.
    pub fn lift(v: S) -> Self {
        let z = v.constant(0.0);
        Self {
            dx: z.clone(),
            dy: z.clone(),
            dxx: z.clone(),
            dyy: z.clone(),
            dxy: z,
            v,
        }
    }

    /// Seeds `x` as the first input direction.
    pub fn seed_x(v: S) -> Self {
        let mut j = Self::lift(v);
        j.dx = j.v.constant(1.0);
        j
    }

    /// Seeds `y` as the second input direction.
    pub fn seed_y(v: S) -> Self {
        let mut j = Self::lift(v);
        j.dy = j.v.constant(1.0);
        j
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    fn chain(&self, f0: S, f1: S, f2: S) -> Self {
        Self {
            v: f0,
            dx: f1.clone() * self.dx.clone(),
            dy: f1.clone() * self.dy.clone(),
            dxx: f2.clone() * self.dx.clone() * self.dx.clone() + f1.clone() * self.dxx.clone(),
            dyy: f2.clone() * self.dy.clone() * self.dy.clone() + f1.clone() * self.dyy.clone(),
            dxy: f2 * self.dx.clone() * self.dy.clone() + f1 * self.dxy.clone(),
        }
    }
}

impl Jet<f64> {
    pub fn var_x(v: f64) -> Self {
        Self::seed_x(v)
    }
    pub fn var_y(v: f64) -> Self {
        Self::seed_y(v)
    }
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dyy: self.dyy + o.dyy,
            dxy: self.dxy + o.dxy,
        }
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
            dxx: self.dxx - o.dxx,
            dyy: self.dyy - o.dyy,
            dxy: self.dxy - o.dxy,
        }
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            dx: -self.dx,
            dy: -self.dy,
            dxx: -self.dxx,
            dyy: -self.dyy,
            dxy: -self.dxy,
        }
    }
}

impl<S: Scalar> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let two = self.v.constant(2.0);
        Self {
            v: self.v.clone() * o.v.clone(),
            dx: self.dx.clone() * o.v.clone() + self.v.clone() * o.dx.clone(),
            dy: self.dy.clone() * o.v.clone() + self.v.clone() * o.dy.clone(),
            dxx: self.dxx * o.v.clone()
                + two.clone() * self.dx.clone() * o.dx.clone()
                + self.v.clone() * o.dxx,
            dyy: self.dyy * o.v.clone() + two * self.dy.clone() * o.dy.clone() + self.v.clone() * o.dyy,
            dxy: self.dxy * o.v.clone() + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
        }
    }
}

impl<S: Scalar> Div for Jet<S> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        let one = o.v.constant(1.0);
        let inv = one / o.v.clone();
        let inv2 = inv.clone() * inv.clone();
        let recip = o.chain(
            inv.clone(),
            -inv2.clone(),
            o.v.constant(2.0) * inv2 * inv,
        );
        self * recip
    }
}

impl<S: Scalar> Scalar for Jet<S> {
    fn constant(&self, v: f64) -> Self {
        Self::lift(self.v.constant(v))
    }
    fn value(&self) -> f64 {
        self.v.value()
    }
    fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e.clone(), e.clone(), e)
    }
    fn ln(&self) -> Self {
        let inv = self.v.constant(1.0) / self.v.clone();
        self.chain(self.v.ln(), inv.clone(), -(inv.clone() * inv))
    }
    fn sin(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s.clone(), c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c.clone(), -s, -c)
    }
    fn tanh(&self) -> Self {
        let t = self.v.tanh();
        let d1 = self.v.constant(1.0) - t.clone() * t.clone();
        let d2 = self.v.constant(-2.0) * t.clone() * d1.clone();
        self.chain(t, d1, d2)
    }
    fn powi(&self, n: i32) -> Self {
        let nf = n as f64;
        let f0 = self.v.powi(n);
        let f1 = self.v.constant(nf) * self.v.powi(n - 1);
        let f2 = self.v.constant(nf * (nf - 1.0)) * self.v.powi(n - 2);
        self.chain(f0, f1, f2)
    }
    fn spline(&self, grid: &SplineGrid, coeffs: &[Self], deriv: usize) -> Self {
        // Coefficients do not depend on the inputs; only their values enter.
        let inner: Vec<S> = coeffs.iter().map(|c| c.v.clone()).collect();
        self.chain(
            self.v.spline(grid, &inner, deriv),
            self.v.spline(grid, &inner, deriv + 1),
            self.v.spline(grid, &inner, deriv + 2),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::evaluate_with_input_derivatives;

    #[test]
    fn linear_field_has_constant_gradient() {
        let b = evaluate_with_input_derivatives(
            |x, y| x.constant(3.0) * x - y.constant(2.0) * y,
            [0.4, -1.2],
        );
        assert_eq!(b.grad, [3.0, -2.0]);
        assert_eq!(b.hess, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn products_and_quotients() {
        // u = x² y / (1 + y²)
        let p = [0.7, -0.3];
        let b = evaluate_with_input_derivatives(
            |x, y| {
                let one = x.constant(1.0);
                x * x * y / (one + y.powi(2))
            },
            p,
        );
        let (x, y) = (p[0], p[1]);
        let q = 1.0 + y * y;
        assert!((b.u - x * x * y / q).abs() < 1e-15);
        assert!((b.grad[0] - 2.0 * x * y / q).abs() < 1e-14);
        let uy = x * x * (1.0 - y * y) / (q * q);
        assert!((b.grad[1] - uy).abs() < 1e-14);
        assert!((b.hess[0] - 2.0 * y / q).abs() < 1e-14);
        assert!((b.hess[2] - 2.0 * x * (1.0 - y * y) / (q * q)).abs() < 1e-14);
        let uyy = x * x * (2.0 * y * (y * y - 3.0)) / (q * q * q);
        assert!((b.hess[1] - uyy).abs() < 1e-13);
    }

    #[test]
    fn transcendental_chain_matches_fd() {
        let f = |x: Jet<f64>, y: Jet<f64>| (x * y).sin() + (x - y).tanh() * (y.exp() + x.cos()).ln();
        let fv = |x: f64, y: f64| (x * y).sin() + (x - y).tanh() * (y.exp() + x.cos()).ln();
        let p = [0.31, 0.57];
        let b = evaluate_with_input_derivatives(f, p);
        let h = 1e-4;
        let uxx = (fv(p[0] + h, p[1]) - 2.0 * fv(p[0], p[1]) + fv(p[0] - h, p[1])) / (h * h);
        let uxy = (fv(p[0] + h, p[1] + h) - fv(p[0] + h, p[1] - h) - fv(p[0] - h, p[1] + h)
            + fv(p[0] - h, p[1] - h))
            / (4.0 * h * h);
        assert!((b.hess[0] - uxx).abs() < 1e-6);
        assert!((b.hess[2] - uxy).abs() < 1e-6);
    }
}

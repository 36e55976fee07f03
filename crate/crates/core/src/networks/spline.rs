//! B-spline bases on uniform grids.
//!
//! A grid with `G` intervals on `[lo, hi]` and degree `m` is extended by `m`
//! knots on each side, giving `G + 2m + 1` knots and `G + m` basis functions.
//! The bases form a partition of unity on `[lo, hi]` and vanish outside the
//! extended knot range.

use serde::{Deserialize, Serialize};

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 5;

/// Uniform, extended knot grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineGrid {
    pub lo: f64,
    pub hi: f64,
    pub intervals: usize,
    pub degree: usize,
}

impl SplineGrid {
    pub fn new(lo: f64, hi: f64, intervals: usize, degree: usize) -> Self {
        debug_assert!(lo < hi && intervals >= 1 && (1..=MAX_DEGREE).contains(&degree));
        Self {
            lo,
            hi,
            intervals,
            degree,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.intervals as f64
    }

    /// Number of basis functions, `G + m`.
    pub fn basis_len(&self) -> usize {
        self.intervals + self.degree
    }

    /// Knot `t_j = lo + (j − m)·h` for `j = 0..=G+2m`.
    pub fn knot(&self, j: usize) -> f64 {
        let h = self.spacing();
        self.lo + (j as f64 - self.degree as f64) * h
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.intervals + 2 * self.degree)
            .map(|j| self.knot(j))
            .collect()
    }

    /// Evaluates the derivatives `0..=3` of the `m + 1` basis functions that are
    /// active at `x`. Returns `None` outside the extended grid.
    pub fn local(&self, x: f64) -> Option<LocalBasis> {
        self.local_upto(x, 3)
    }

    /// [`Self::local`] with derivative rows above `max_deriv` left at zero.
    pub fn local_upto(&self, x: f64, max_deriv: usize) -> Option<LocalBasis> {
        let m = self.degree;
        let h = self.spacing();
        let t0 = self.lo - m as f64 * h;
        let u_abs = (x - t0) / h;
        let n_spans = self.intervals + 2 * m;
        if !(u_abs >= 0.0) || u_abs >= n_spans as f64 {
            return None;
        }
        let span = (u_abs.floor() as usize).min(n_spans - 1);
        let u = u_abs - span as f64;

        let inv_h = 1.0 / h;
        let values = match m {
            1 => local_values::<1>(u, inv_h, max_deriv),
            2 => local_values::<2>(u, inv_h, max_deriv),
            3 => local_values::<3>(u, inv_h, max_deriv),
            4 => local_values::<4>(u, inv_h, max_deriv),
            _ => local_values::<5>(u, inv_h, max_deriv),
        };
        Some(LocalBasis {
            first: span as isize - m as isize,
            len: self.basis_len(),
            degree: m,
            values,
        })
    }

    /// Σ c_i B_i^{(deriv)}(x).
    pub fn eval(&self, coeffs: &[f64], x: f64, deriv: usize) -> f64 {
        debug_assert_eq!(coeffs.len(), self.basis_len());
        if deriv > 3 {
            return 0.0;
        }
        match self.local(x) {
            None => 0.0,
            Some(b) => b.dot(coeffs, deriv),
        }
    }
}

/// Nonzero degree-`M` basis values and derivatives on one span, at local
/// coordinate `u ∈ [0, 1)`; entry `r` belongs to global index `span − M + r`.
#[inline(always)]
fn local_values<const M: usize>(u: f64, inv_h: f64, max_deriv: usize) -> [[f64; MAX_DEGREE + 1]; 4] {
    // tri[p][s] is the degree-p function with global index span − p + s.
    let mut tri = [[0.0f64; MAX_DEGREE + 1]; MAX_DEGREE + 1];
    tri[0][0] = 1.0;
    for p in 1..=M {
        let inv = 1.0 / p as f64;
        tri[p][0] = (1.0 - u) * tri[p - 1][0] * inv;
        for s in 1..p {
            tri[p][s] = ((u + (p - s) as f64) * tri[p - 1][s - 1] + (s as f64 + 1.0 - u) * tri[p - 1][s]) * inv;
        }
        tri[p][p] = u * tri[p - 1][p - 1] * inv;
    }
    // B'_{i,p} = (B_{i,p−1} − B_{i+1,p−1}) / h, applied d times to degree M − d.
    let mut values = [[0.0f64; MAX_DEGREE + 1]; 4];
    for d in 0..=M.min(3) {
        if d > max_deriv {
            break;
        }
        let mut w = tri[M - d];
        for l in 0..d {
            let len = M - d + 1 + l;
            let mut next = [0.0f64; MAX_DEGREE + 1];
            next[0] = -w[0] * inv_h;
            for r in 1..len {
                next[r] = (w[r - 1] - w[r]) * inv_h;
            }
            next[len] = w[len - 1] * inv_h;
            w = next;
        }
        values[d] = w;
    }
    values
}

/// The `m + 1` basis functions active at a point, with derivatives.
#[derive(Clone, Copy, Debug)]
pub struct LocalBasis {
    /// Global index of the first active function; may be negative near the
    /// extended-grid edges, where out-of-range entries are skipped.
    pub first: isize,
    pub len: usize,
    pub degree: usize,
    /// `values[d][r]` is the `d`-th derivative of function `first + r`.
    pub values: [[f64; MAX_DEGREE + 1]; 4],
}

impl LocalBasis {
    /// Range of local offsets `r` whose global index is valid.
    #[inline]
    pub fn valid(&self) -> std::ops::Range<usize> {
        let lo = (-self.first).max(0) as usize;
        let hi = ((self.len as isize - self.first).min(self.degree as isize + 1)).max(0) as usize;
        lo..hi.max(lo)
    }

    #[inline]
    pub fn dot(&self, coeffs: &[f64], deriv: usize) -> f64 {
        let mut acc = 0.0;
        for r in self.valid() {
            acc += coeffs[(self.first + r as isize) as usize] * self.values[deriv][r];
        }
        acc
    }
}

/// All `G + m` basis values at `x` by the Cox–de Boor recursion on an arbitrary
/// non-decreasing knot vector.
pub fn spline_basis(knots: &[f64], degree: usize, x: f64) -> Vec<f64> {
    basis_derivative(knots, degree, x, 0)
}

/// The `deriv`-th derivative of every degree-`degree` basis function at `x`.
pub fn basis_derivative(knots: &[f64], degree: usize, x: f64, deriv: usize) -> Vec<f64> {
    let count = knots.len() - degree - 1;
    if deriv > degree {
        return vec![0.0; count];
    }
    // Degree-0 indicator functions on half-open spans.
    let mut level: Vec<f64> = (0..knots.len() - 1)
        .map(|i| {
            if knots[i] <= x && x < knots[i + 1] {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for p in 1..=degree {
        let derive = p > degree - deriv;
        let mut next = vec![0.0; knots.len() - p - 1];
        for (i, out) in next.iter_mut().enumerate() {
            let d1 = knots[i + p] - knots[i];
            let d2 = knots[i + p + 1] - knots[i + 1];
            *out = if derive {
                let a = if d1 > 0.0 { level[i] / d1 } else { 0.0 };
                let b = if d2 > 0.0 { level[i + 1] / d2 } else { 0.0 };
                p as f64 * (a - b)
            } else {
                let a = if d1 > 0.0 {
                    (x - knots[i]) / d1 * level[i]
                } else {
                    0.0
                };
                let b = if d2 > 0.0 {
                    (knots[i + p + 1] - x) / d2 * level[i + 1]
                } else {
                    0.0
                };
                a + b
            };
        }
        level = next;
    }
    level.truncate(count);
    level
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_hat_values() {
        let grid = SplineGrid::new(0.0, 1.0, 2, 1);
        let b = spline_basis(&grid.knots(), 1, 0.25);
        assert_eq!(b.len(), 3);
        for (got, want) in b.iter().zip([0.5, 0.5, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn local_matches_recursion() {
        for &(g, m) in &[(5usize, 2usize), (10, 3), (7, 1), (4, 4)] {
            let grid = SplineGrid::new(-1.3, 0.7, g, m);
            let knots = grid.knots();
            for k in 0..400 {
                let x = -2.5 + 4.0 * k as f64 / 399.0;
                let near_knot = knots.iter().any(|t| (x - t).abs() < 1e-9);
                for d in 0..=3usize.min(m) {
                    // The m-th derivative jumps at knots.
                    if d == m && near_knot {
                        continue;
                    }
                    let full = basis_derivative(&knots, m, x, d);
                    let mut local = vec![0.0; grid.basis_len()];
                    if let Some(lb) = grid.local(x) {
                        for r in lb.valid() {
                            local[(lb.first + r as isize) as usize] = lb.values[d][r];
                        }
                    }
                    for (a, b) in full.iter().zip(&local) {
                        assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "g={g} m={m} x={x} d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn outside_extended_grid_is_zero() {
        let grid = SplineGrid::new(-1.0, 1.0, 5, 3);
        assert!(grid.local(-3.0).is_none());
        assert!(grid.local(2.21).is_none());
        let c = vec![1.0; grid.basis_len()];
        assert_eq!(grid.eval(&c, 5.0, 0), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let grid = SplineGrid::new(-1.0, 1.0, 6, 3);
        let c: Vec<f64> = (0..grid.basis_len()).map(|i| (i as f64 * 0.7).sin()).collect();
        for k in 0..50 {
            let x = -0.95 + 1.9 * k as f64 / 49.0 + 1e-3;
            let h = 1e-6;
            let fd = (grid.eval(&c, x + h, 0) - grid.eval(&c, x - h, 0)) / (2.0 * h);
            assert!((fd - grid.eval(&c, x, 1)).abs() < 1e-6);
            let fd2 = (grid.eval(&c, x + h, 1) - grid.eval(&c, x - h, 1)) / (2.0 * h);
            assert!((fd2 - grid.eval(&c, x, 2)).abs() < 1e-5);
        }
    }
}

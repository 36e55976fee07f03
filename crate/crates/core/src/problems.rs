//! Benchmark interface problems with manufactured solutions.
//!
//! Every problem solves `−∇·(a_i ∇u_i) = f_i` in `Ω_i` with `u = g` on the outer
//! and hole boundaries and the jumps `⟦u⟧ = u₂ − u₁ = φ`, `⟦a∇u·n⟧ = ψ` on Γ,
//! where `n` points from Ω₁ into Ω₂. All data are closed forms;
//! [`verify_manufactured`] cross-checks them with finite differences.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::EvalBundle;
use crate::geometry::{
    DomainDecomposition, GeometryError, Membership, Point, PolarTerm, Region, StarMode, ON_CURVE_TOL,
};
use crate::networks::Side;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    E1,
    E4,
    E5,
    E6,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [ProblemId::E1, ProblemId::E4, ProblemId::E5, ProblemId::E6];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::E1 => "e1",
            ProblemId::E4 => "e4",
            ProblemId::E5 => "e5",
            ProblemId::E6 => "e6",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = ProblemError;
    fn from_str(s: &str) -> Result<Self, ProblemError> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(ProblemId::E1),
            "e4" => Ok(ProblemId::E4),
            "e5" => Ok(ProblemId::E5),
            "e6" => Ok(ProblemId::E6),
            _ => Err(ProblemError::UnknownProblem(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem id '{0}' (expected e1, e4, e5 or e6)")]
    UnknownProblem(String),
    #[error("point ({x}, {y}) is not in the closure of {side:?} (classified {found:?})")]
    SideMismatch {
        x: f64,
        y: f64,
        side: Side,
        found: Membership,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Data of an interface problem with a known exact solution.
pub trait ManufacturedData {
    fn decomposition(&self) -> &DomainDecomposition;
    /// Coefficient `a_i` and its gradient.
    fn coefficient(&self, side: Side, p: Point) -> (f64, [f64; 2]);
    /// Exact `u_i` with gradient and Hessian.
    fn exact(&self, side: Side, p: Point) -> EvalBundle;
    fn source(&self, side: Side, p: Point) -> f64;
    /// Value jump `φ`.
    fn phi(&self, p: Point) -> f64;
    /// Flux jump `ψ` for the Ω₁→Ω₂ normal `n`.
    fn psi(&self, p: Point, n: Point) -> f64;
    /// Dirichlet data `g_i`.
    fn boundary_value(&self, side: Side, p: Point) -> f64 {
        self.exact(side, p).u
    }
}

/// One of the built-in benchmarks.
#[derive(Clone, Debug)]
pub struct ProblemDefinition {
    pub id: ProblemId,
    pub decomposition: DomainDecomposition,
    /// Lower clip for E5's `a₂ = xy`; `None` keeps the coefficient verbatim.
    pub clip_coefficient_min: Option<f64>,
}

fn square(half: f64) -> Region {
    Region::AxisAlignedBox {
        min: [-half, -half],
        max: [half, half],
    }
}

impl ProblemDefinition {
    pub fn builtin(id: ProblemId) -> Self {
        let decomposition = match id {
            ProblemId::E1 => DomainDecomposition::new(
                square(1.0),
                Region::Circle {
                    center: [0.0, 0.0],
                    radius: 0.5,
                },
                vec![],
            ),
            ProblemId::E4 => DomainDecomposition::new(
                square(1.0),
                Region::ParametricCurve {
                    a: 0.40178,
                    b: 0.40178,
                    m: 2.0,
                    n: 6.0,
                },
                vec![],
            ),
            ProblemId::E5 => {
                let term = |freq: f64, sin: f64, cos: f64| PolarTerm { freq, sin, cos };
                DomainDecomposition::new(
                    square(2.0),
                    Region::PolarCurve {
                        constant: 0.6,
                        terms: vec![term(3.0, 0.216, 0.0), term(2.0, 0.0, 0.096), term(5.0, 0.0, 0.24)],
                        clip_negative: false,
                    },
                    vec![Region::PolarCurve {
                        constant: 0.0,
                        terms: vec![term(4.0, 0.14, 0.0), term(6.0, 0.0, 0.12), term(5.0, 0.0, 0.09)],
                        clip_negative: true,
                    }],
                )
            }
            ProblemId::E6 => {
                let mode = |n: f64, beta: f64, theta: f64| StarMode { n, beta, theta };
                DomainDecomposition::new(
                    Region::Annulus {
                        r_in: 0.151,
                        r_out: 0.911,
                    },
                    Region::LevelSetStar {
                        r0: 0.483,
                        modes: vec![mode(3.0, 0.1, 0.5), mode(4.0, -0.1, 1.8), mode(7.0, 0.15, 0.0)],
                    },
                    vec![],
                )
            }
        }
        .expect("built-in geometry is valid");
        Self {
            id,
            decomposition,
            clip_coefficient_min: None,
        }
    }

    /// Exact value on `side`, checking that `p` lies in that side's closure.
    pub fn exact_at(&self, p: Point, side: Side) -> Result<f64, ProblemError> {
        let d = &self.decomposition;
        let found = d.contains(p)?;
        let ok = match (found, side) {
            (Membership::OnGamma, _) => true,
            (Membership::Inside1, Side::Side1) | (Membership::Inside2, Side::Side2) => true,
            (Membership::Outside, Side::Side1) => {
                d.boundary1_curves().iter().any(|c| c.curve_distance(p) < ON_CURVE_TOL)
            }
            (Membership::Outside, Side::Side2) => d.boundary2_curve().curve_distance(p) < ON_CURVE_TOL,
            _ => false,
        };
        // Hole boundaries of Ω₁ may classify either way up to rounding.
        let ok = ok
            || (side == Side::Side1
                && d.boundary1_curves().iter().any(|c| c.curve_distance(p) < ON_CURVE_TOL));
        if !ok {
            return Err(ProblemError::SideMismatch {
                x: p[0],
                y: p[1],
                side,
                found,
            });
        }
        Ok(self.exact(side, p).u)
    }

    fn e5_a2(&self, p: Point) -> (f64, [f64; 2]) {
        let a = p[0] * p[1];
        match self.clip_coefficient_min {
            Some(min) if a < min => (min, [0.0, 0.0]),
            _ => (a, [p[1], p[0]]),
        }
    }
}

/// Constant bundle with zero derivatives.
fn constant(u: f64) -> EvalBundle {
    EvalBundle {
        u,
        grad: [0.0; 2],
        hess: [0.0; 3],
    }
}

/// Bundle of a function of `s = x + y` given `g(s), g'(s), g''(s)`.
fn of_sum(g0: f64, g1: f64, g2: f64) -> EvalBundle {
    EvalBundle {
        u: g0,
        grad: [g1, g1],
        hess: [g2, g2, g2],
    }
}

fn chebyshev5(t: f64) -> [f64; 3] {
    let t2 = t * t;
    [
        ((16.0 * t2 - 20.0) * t2 + 5.0) * t,
        (80.0 * t2 - 60.0) * t2 + 5.0,
        (320.0 * t2 - 120.0) * t,
    ]
}

impl ManufacturedData for ProblemDefinition {
    fn decomposition(&self) -> &DomainDecomposition {
        &self.decomposition
    }

    fn coefficient(&self, side: Side, p: Point) -> (f64, [f64; 2]) {
        let (x, y) = (p[0], p[1]);
        match (self.id, side) {
            (ProblemId::E1, _) => (1.0, [0.0, 0.0]),
            (ProblemId::E4, Side::Side1) => ((x * x - y * y + 3.0) / 7.0, [2.0 * x / 7.0, -2.0 * y / 7.0]),
            (ProblemId::E4, Side::Side2) => ((2.0 + x * y) / 5.0, [y / 5.0, x / 5.0]),
            (ProblemId::E5, Side::Side1) => (x * x + y * y, [2.0 * x, 2.0 * y]),
            (ProblemId::E5, Side::Side2) => self.e5_a2(p),
            (ProblemId::E6, Side::Side1) => {
                let w = 4.0 * PI;
                (
                    10.0 + (w * x).sin() - (w * y).sin(),
                    [w * (w * x).cos(), -w * (w * y).cos()],
                )
            }
            (ProblemId::E6, Side::Side2) => (1.0, [0.0, 0.0]),
        }
    }

    fn exact(&self, side: Side, p: Point) -> EvalBundle {
        let (x, y) = (p[0], p[1]);
        let s = x + y;
        match (self.id, side) {
            (ProblemId::E1, Side::Side1) => constant(1.0),
            (ProblemId::E1, Side::Side2) => {
                let r2 = x * x + y * y;
                let k = 1.0 / (r2 * LN_2);
                let k2 = k / r2;
                EvalBundle {
                    u: 1.0 - 0.5 * r2.ln() / LN_2,
                    grad: [-x * k, -y * k],
                    hess: [(x * x - y * y) * k2, (y * y - x * x) * k2, 2.0 * x * y * k2],
                }
            }
            (ProblemId::E4, Side::Side1) => {
                let (sn, cs) = s.sin_cos();
                of_sum(sn + cs + 1.0, cs - sn, -(sn + cs))
            }
            (ProblemId::E4, Side::Side2) => of_sum(s + 1.0, 1.0, 0.0),
            (ProblemId::E5, Side::Side1) => {
                let (sn, cs) = s.sin_cos();
                of_sum(cs, -sn, -cs)
            }
            (ProblemId::E5, Side::Side2) => {
                let (sn, cs) = s.sin_cos();
                of_sum(sn, cs, -sn)
            }
            (ProblemId::E6, Side::Side1) => {
                let (s2x, c2x) = (2.0 * x).sin_cos();
                let (s2y, c2y) = (2.0 * y).sin_cos();
                EvalBundle {
                    u: s2x * c2y,
                    grad: [2.0 * c2x * c2y, -2.0 * s2x * s2y],
                    hess: [-4.0 * s2x * c2y, -4.0 * s2x * c2y, -4.0 * c2x * s2y],
                }
            }
            (ProblemId::E6, Side::Side2) => {
                let [t0, t1, t2] = chebyshev5((y - x) / 3.0);
                let l = (s + 3.0).ln();
                let q = 1.0 / (s + 3.0);
                EvalBundle {
                    u: t0 * l,
                    grad: [-t1 * l / 3.0 + t0 * q, t1 * l / 3.0 + t0 * q],
                    hess: [
                        t2 * l / 9.0 - 2.0 / 3.0 * t1 * q - t0 * q * q,
                        t2 * l / 9.0 + 2.0 / 3.0 * t1 * q - t0 * q * q,
                        -t2 * l / 9.0 - t0 * q * q,
                    ],
                }
            }
        }
    }

    fn source(&self, side: Side, p: Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        let s = x + y;
        match (self.id, side) {
            (ProblemId::E1, _) => 0.0,
            (ProblemId::E4, Side::Side1) => {
                let (sn, cs) = s.sin_cos();
                let a1 = (x * x - y * y + 3.0) / 7.0;
                -2.0 * (x - y) / 7.0 * (cs - sn) + 2.0 * a1 * (sn + cs)
            }
            (ProblemId::E4, Side::Side2) => -s / 5.0,
            (ProblemId::E5, Side::Side1) => {
                let (sn, cs) = s.sin_cos();
                2.0 * s * sn + 2.0 * (x * x + y * y) * cs
            }
            (ProblemId::E5, Side::Side2) => {
                let (sn, cs) = s.sin_cos();
                match self.clip_coefficient_min {
                    Some(min) if x * y < min => 2.0 * min * sn,
                    _ => -s * cs + 2.0 * x * y * sn,
                }
            }
            (ProblemId::E6, Side::Side1) => {
                let w = 4.0 * PI;
                let (s2x, c2x) = (2.0 * x).sin_cos();
                let (s2y, c2y) = (2.0 * y).sin_cos();
                let a1 = 10.0 + (w * x).sin() - (w * y).sin();
                let grad_a_dot_grad_u =
                    w * (w * x).cos() * 2.0 * c2x * c2y + w * (w * y).cos() * 2.0 * s2x * s2y;
                -grad_a_dot_grad_u + 8.0 * a1 * s2x * c2y
            }
            (ProblemId::E6, Side::Side2) => {
                let [t0, _, t2] = chebyshev5((y - x) / 3.0);
                let l = (s + 3.0).ln();
                let q = 1.0 / (s + 3.0);
                -(2.0 * t2 * l / 9.0 - 2.0 * t0 * q * q)
            }
        }
    }

    fn phi(&self, p: Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        let s = x + y;
        match self.id {
            ProblemId::E1 => {
                let r2 = x * x + y * y;
                -0.5 * r2.ln() / LN_2
            }
            ProblemId::E4 => s - s.sin() - s.cos(),
            ProblemId::E5 => s.sin() - s.cos(),
            ProblemId::E6 => {
                let [t0, _, _] = chebyshev5((y - x) / 3.0);
                t0 * (s + 3.0).ln() - (2.0 * x).sin() * (2.0 * y).cos()
            }
        }
    }

    fn psi(&self, p: Point, n: Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        let s = x + y;
        let nsum = n[0] + n[1];
        match self.id {
            // Radial derivative of −log₂ρ is −1/(ρ ln 2); the normal is radial.
            ProblemId::E1 => -(x * n[0] + y * n[1]) / ((x * x + y * y) * LN_2),
            ProblemId::E4 => {
                let a1 = (x * x - y * y + 3.0) / 7.0;
                let a2 = (2.0 + x * y) / 5.0;
                nsum * (a2 - a1 * (s.cos() - s.sin()))
            }
            ProblemId::E5 => {
                let (a2, _) = self.e5_a2(p);
                nsum * (a2 * s.cos() + (x * x + y * y) * s.sin())
            }
            ProblemId::E6 => {
                let [t0, t1, _] = chebyshev5((y - x) / 3.0);
                let l = (s + 3.0).ln();
                let q = 1.0 / (s + 3.0);
                let flux2 = (-t1 * l / 3.0 + t0 * q) * n[0] + (t1 * l / 3.0 + t0 * q) * n[1];
                let w = 4.0 * PI;
                let a1 = 10.0 + (w * x).sin() - (w * y).sin();
                let (s2x, c2x) = (2.0 * x).sin_cos();
                let (s2y, c2y) = (2.0 * y).sin_cos();
                let flux1 = a1 * (2.0 * c2x * c2y * n[0] - 2.0 * s2x * s2y * n[1]);
                flux2 - flux1
            }
        }
    }
}

/// Outcome of [`verify_manufactured`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub n_check: usize,
    pub max_interior_residual: f64,
    pub max_jump_mismatch: f64,
    pub interior_tol: f64,
    pub jump_tol: f64,
    pub passed: bool,
}

/// `−∇·(a∇u)` by the conservative five-point stencil.
fn fd_operator(data: &dyn ManufacturedData, side: Side, p: Point, h: f64) -> f64 {
    let u = |q: Point| data.exact(side, q).u;
    let a = |q: Point| data.coefficient(side, q).0;
    let (x, y) = (p[0], p[1]);
    let u0 = u(p);
    let flux_x = a([x + 0.5 * h, y]) * (u([x + h, y]) - u0) - a([x - 0.5 * h, y]) * (u0 - u([x - h, y]));
    let flux_y = a([x, y + 0.5 * h]) * (u([x, y + h]) - u0) - a([x, y - 0.5 * h]) * (u0 - u([x, y - h]));
    -(flux_x + flux_y) / (h * h)
}

/// Checks `f`, `φ` and `ψ` against the exact solution: the PDE residual by
/// finite differences at random interior points, and both jumps at random
/// interface points from one-sided analytic traces.
pub fn verify_manufactured(
    data: &dyn ManufacturedData,
    n_check: usize,
    interior_tol: f64,
    jump_tol: f64,
    seed: u64,
) -> VerificationReport {
    const H: f64 = 1e-4;
    let d = data.decomposition();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = d.bounding_box();
    let mut counts = [0usize; 2];
    let mut max_res: f64 = 0.0;
    let mut guard = 0usize;
    while counts.iter().any(|&c| c < n_check) && guard < 1_000_000 * n_check.max(1) {
        guard += 1;
        let p = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        let side = match d.contains(p) {
            Ok(Membership::Inside1) => Side::Side1,
            Ok(Membership::Inside2) => Side::Side2,
            _ => continue,
        };
        let k = side as usize;
        if counts[k] >= n_check {
            continue;
        }
        counts[k] += 1;
        let r = (fd_operator(data, side, p, H) - data.source(side, p)).abs();
        max_res = max_res.max(if r.is_nan() { f64::INFINITY } else { r });
    }
    let mut max_jump: f64 = 0.0;
    let gamma = &d.gamma;
    for _ in 0..n_check {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let p = gamma.point_at(theta);
        let n = gamma.normal_at(theta);
        let (u1, u2) = (data.exact(Side::Side1, p), data.exact(Side::Side2, p));
        let (a1, _) = data.coefficient(Side::Side1, p);
        let (a2, _) = data.coefficient(Side::Side2, p);
        let value = (u2.u - u1.u - data.phi(p)).abs();
        let dot = |g: [f64; 2]| g[0] * n[0] + g[1] * n[1];
        let flux = (a2 * dot(u2.grad) - a1 * dot(u1.grad) - data.psi(p, n)).abs();
        let m = value.max(flux);
        max_jump = max_jump.max(if m.is_nan() { f64::INFINITY } else { m });
    }
    VerificationReport {
        n_check,
        max_interior_residual: max_res,
        max_jump_mismatch: max_jump,
        interior_tol,
        jump_tol,
        passed: max_res <= interior_tol && max_jump <= jump_tol,
    }
}

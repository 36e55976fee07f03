//! Error metrics on held-out test points and field exports.

use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{discretize, Membership, Point, Region, DEFAULT_RESOLUTION};
use crate::networks::{DualNetwork, Side};
use crate::problems::{ManufacturedData, ProblemDefinition};
use crate::sampling::{sample_curve, sample_subdomain, substream, SamplingError};

pub const N_TEST_INTERIOR: usize = 10_000;
pub const N_TEST_CURVE: usize = 2_000;

#[derive(Debug, Error)]
pub enum ReportingError {
    #[error("length mismatch: {0} exact values, {1} approximations")]
    Length(usize, usize),
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// `sqrt(Σ|u−û|² / Σ|u|²)`; NaN when `Σ|u|² = 0`.
pub fn relative_l2(exact: &[f64], approx: &[f64]) -> Result<f64, ReportingError> {
    if exact.len() != approx.len() || exact.is_empty() {
        return Err(ReportingError::Length(exact.len(), approx.len()));
    }
    let num: f64 = exact.iter().zip(approx).map(|(u, v)| (u - v) * (u - v)).sum();
    let den: f64 = exact.iter().map(|u| u * u).sum();
    Ok(if den == 0.0 { f64::NAN } else { (num / den).sqrt() })
}

fn ser_nan<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_nan<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Region-wise relative ℓ2 errors and the global max-abs error. Undefined
/// entries are NaN in memory, `null` in JSON and listed in `undefined`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorReport {
    #[serde(serialize_with = "ser_nan", deserialize_with = "de_nan")]
    pub e_omega1: f64,
    #[serde(serialize_with = "ser_nan", deserialize_with = "de_nan")]
    pub e_omega2: f64,
    /// Worse of the two one-sided interface errors.
    #[serde(serialize_with = "ser_nan", deserialize_with = "de_nan")]
    pub e_gamma: f64,
    #[serde(serialize_with = "ser_nan", deserialize_with = "de_nan")]
    pub e_gamma_side1: f64,
    #[serde(serialize_with = "ser_nan", deserialize_with = "de_nan")]
    pub e_gamma_side2: f64,
    #[serde(serialize_with = "ser_nan", deserialize_with = "de_nan")]
    pub e_boundary1: f64,
    #[serde(serialize_with = "ser_nan", deserialize_with = "de_nan")]
    pub e_boundary2: f64,
    pub max_abs: f64,
    pub n_test: usize,
    pub seed: u64,
    pub undefined: Vec<String>,
}

impl ErrorReport {
    /// `(name, value)` for the table columns.
    pub fn columns(&self) -> [(&'static str, f64); 6] {
        [
            ("e_omega1", self.e_omega1),
            ("e_omega2", self.e_omega2),
            ("e_gamma", self.e_gamma),
            ("e_boundary1", self.e_boundary1),
            ("e_boundary2", self.e_boundary2),
            ("max_abs", self.max_abs),
        ]
    }
}

/// Test set for one region: points with the side whose network is compared.
struct TestSet {
    points: Vec<Point>,
    side: Side,
}

fn curve_points(curves: &[Region], n: usize, seed: u64, stream: u64) -> Result<Vec<Point>, ReportingError> {
    if curves.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = substream(seed, stream);
    let mut pts = Vec::new();
    let per = n / curves.len();
    for (i, c) in curves.iter().enumerate() {
        let poly = discretize(c, DEFAULT_RESOLUTION).map_err(SamplingError::from)?;
        let m = if i + 1 == curves.len() { n - per * i } else { per };
        pts.extend(sample_curve(&poly, m, &mut rng).points);
    }
    Ok(pts)
}

fn region_error(field: &dyn Fn(Side, &[Point]) -> Vec<f64>, def: &dyn ManufacturedData, set: &TestSet, max_abs: &mut f64) -> Result<f64, ReportingError> {
    if set.points.is_empty() {
        return Ok(f64::NAN);
    }
    let exact: Vec<f64> = set.points.iter().map(|&p| def.exact(set.side, p).u).collect();
    let approx = field(set.side, &set.points);
    for (u, v) in exact.iter().zip(&approx) {
        let e = (u - v).abs();
        if e > *max_abs || e.is_nan() {
            *max_abs = e;
        }
    }
    relative_l2(&exact, &approx)
}

/// Errors of an arbitrary field pair on fresh seeded test sets: `n_test`
/// points per subdomain, `n_test / 5` per boundary or interface curve.
pub fn evaluate_field_errors(
    field: &dyn Fn(Side, &[Point]) -> Vec<f64>,
    def: &ProblemDefinition,
    n_test: usize,
    seed: u64,
) -> Result<ErrorReport, ReportingError> {
    let decomp = &def.decomposition;
    let n_curve = (n_test / 5).max(1);
    let sets = [
        TestSet {
            points: sample_subdomain(decomp, Side::Side1, n_test, &mut substream(seed, 101))?,
            side: Side::Side1,
        },
        TestSet {
            points: sample_subdomain(decomp, Side::Side2, n_test, &mut substream(seed, 102))?,
            side: Side::Side2,
        },
    ];
    let gamma = curve_points(std::slice::from_ref(&decomp.gamma), n_curve, seed, 103)?;
    let b1 = curve_points(&decomp.boundary1_curves(), n_curve, seed, 104)?;
    let b2 = curve_points(&[decomp.boundary2_curve()], n_curve, seed, 105)?;
    let mut max_abs = 0.0;
    let e_omega1 = region_error(field, def, &sets[0], &mut max_abs)?;
    let e_omega2 = region_error(field, def, &sets[1], &mut max_abs)?;
    let g1 = region_error(field, def, &TestSet { points: gamma.clone(), side: Side::Side1 }, &mut max_abs)?;
    let g2 = region_error(field, def, &TestSet { points: gamma, side: Side::Side2 }, &mut max_abs)?;
    let e_boundary1 = region_error(field, def, &TestSet { points: b1, side: Side::Side1 }, &mut max_abs)?;
    let e_boundary2 = region_error(field, def, &TestSet { points: b2, side: Side::Side2 }, &mut max_abs)?;
    let e_gamma = if g1.is_nan() || g2.is_nan() { f64::NAN } else { g1.max(g2) };
    let mut report = ErrorReport {
        e_omega1,
        e_omega2,
        e_gamma,
        e_gamma_side1: g1,
        e_gamma_side2: g2,
        e_boundary1,
        e_boundary2,
        max_abs,
        n_test,
        seed,
        undefined: Vec::new(),
    };
    let named = [
        ("e_omega1", report.e_omega1),
        ("e_omega2", report.e_omega2),
        ("e_gamma", report.e_gamma),
        ("e_gamma_side1", report.e_gamma_side1),
        ("e_gamma_side2", report.e_gamma_side2),
        ("e_boundary1", report.e_boundary1),
        ("e_boundary2", report.e_boundary2),
    ];
    report.undefined = named.iter().filter(|(_, v)| v.is_nan()).map(|(n, _)| n.to_string()).collect();
    Ok(report)
}

/// [`evaluate_field_errors`] for a trained dual network.
pub fn evaluate_errors(dual: &DualNetwork, def: &ProblemDefinition, n_test: usize, seed: u64) -> Result<ErrorReport, ReportingError> {
    evaluate_field_errors(&|side, pts| dual.net(side).values(pts), def, n_test, seed)
}

/// One grid node of [`field_grid`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    /// `None` outside Ω (including holes).
    pub side: Option<Side>,
    pub u_hat: f64,
    pub u_exact: f64,
}

impl GridRow {
    pub fn abs_error(&self) -> f64 {
        (self.u_hat - self.u_exact).abs()
    }
}

/// Network and exact values on a uniform `resolution²` grid over Ω's
/// bounding box, row-major in `y` then `x`. Interface nodes are assigned to Ω₁.
pub fn field_grid(dual: &DualNetwork, def: &ProblemDefinition, resolution: usize) -> Result<Vec<GridRow>, ReportingError> {
    if resolution < 2 {
        return Err(ReportingError::Resolution(resolution));
    }
    let (lo, hi) = def.decomposition.bounding_box();
    let step = |i: usize, a: f64, b: f64| a + (b - a) * i as f64 / (resolution - 1) as f64;
    let mut rows = Vec::with_capacity(resolution * resolution);
    for iy in 0..resolution {
        for ix in 0..resolution {
            let p = [step(ix, lo[0], hi[0]), step(iy, lo[1], hi[1])];
            let side = match def.decomposition.contains(p) {
                Ok(Membership::Inside1) | Ok(Membership::OnGamma) => Some(Side::Side1),
                Ok(Membership::Inside2) => Some(Side::Side2),
                _ => None,
            };
            let (u_hat, u_exact) = match side {
                Some(s) => (dual.net(s).forward(p), def.exact(s, p).u),
                None => (f64::NAN, f64::NAN),
            };
            rows.push(GridRow { x: p[0], y: p[1], side, u_hat, u_exact });
        }
    }
    Ok(rows)
}

pub const GRID_HEADER: &str = "x,y,u_hat,u_exact,abs_error,side";

/// CSV text of [`field_grid`].
pub fn export_field_grid(dual: &DualNetwork, def: &ProblemDefinition, resolution: usize) -> Result<String, ReportingError> {
    let rows = field_grid(dual, def, resolution)?;
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for r in rows {
        match r.side {
            Some(s) => {
                let tag = if s == Side::Side1 { "1" } else { "2" };
                writeln!(out, "{:e},{:e},{:e},{:e},{:e},{}", r.x, r.y, r.u_hat, r.u_exact, r.abs_error(), tag).unwrap();
            }
            None => writeln!(out, "{:e},{:e},,,,none", r.x, r.y).unwrap(),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::{Backbone, MlpNetwork};
    use crate::problems::ProblemId;

    fn zero_dual() -> DualNetwork {
        let z = MlpNetwork::zeros(&[2, 4, 1]).unwrap();
        DualNetwork::new(Backbone::Mlp(z.clone()), Backbone::Mlp(z)).unwrap()
    }

    #[test]
    fn relative_l2_hand_cases() {
        assert_eq!(relative_l2(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(relative_l2(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((relative_l2(&[3.0, 4.0], &[3.0, 0.0]).unwrap() - 0.8).abs() < 1e-15);
        assert!(relative_l2(&[0.0, 0.0], &[1.0, 0.0]).unwrap().is_nan());
        assert!(relative_l2(&[1.0], &[]).is_err());
    }

    #[test]
    fn exact_field_has_zero_error() {
        for id in ProblemId::ALL {
            let def = ProblemDefinition::builtin(id);
            let r = evaluate_field_errors(&|s, pts| pts.iter().map(|&p| def.exact(s, p).u).collect(), &def, 500, 3).unwrap();
            for (name, v) in r.columns() {
                assert!(v.is_nan() || v < 1e-12, "{id} {name} {v}");
            }
        }
    }

    #[test]
    fn zero_network_on_e1() {
        let def = ProblemDefinition::builtin(ProblemId::E1);
        let r = evaluate_errors(&zero_dual(), &def, 400, 1).unwrap();
        assert_eq!(r.e_omega1, 1.0);
        assert_eq!(r.e_omega2, 1.0);
        assert!(r.e_boundary1.is_nan());
        assert_eq!(r.undefined, vec!["e_boundary1".to_string()]);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"e_boundary1\":null"));
        let back: ErrorReport = serde_json::from_str(&json).unwrap();
        assert!(back.e_boundary1.is_nan() && back.e_omega1 == 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let def = ProblemDefinition::builtin(ProblemId::E4);
        let a = serde_json::to_string(&evaluate_errors(&zero_dual(), &def, 300, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&evaluate_errors(&zero_dual(), &def, 300, 9).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corner_grid() {
        let def = ProblemDefinition::builtin(ProblemId::E1);
        let csv = export_field_grid(&zero_dual(), &def, 2).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], GRID_HEADER);
        assert!(lines[1].starts_with("-1e0,-1e0,"));
        assert!(lines[4].starts_with("1e0,1e0,"));
        assert!(export_field_grid(&zero_dual(), &def, 1).is_err());
    }

    #[test]
    fn holes_are_marked_none() {
        let def = ProblemDefinition::builtin(ProblemId::E6);
        let rows = field_grid(&zero_dual(), &def, 21).unwrap();
        let centre = rows.iter().find(|r| r.x.abs() < 1e-12 && r.y.abs() < 1e-12).unwrap();
        assert_eq!(centre.side, None);
        assert!(rows.iter().any(|r| r.side == Some(Side::Side2)));
    }
}

//! Collocation point generation and RAR-D resampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    discretize, DomainDecomposition, GeometryError, InterfacePolyline, Membership, Point, Region,
    DEFAULT_RESOLUTION,
};
use crate::networks::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("region sampling failed: accepted {accepted} of {candidates} candidates")]
    Failure { accepted: usize, candidates: usize },
    #[error("residuals must be finite and non-negative")]
    InvalidResiduals,
    #[error("invalid sampling request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Candidate budget after which a low acceptance rate aborts sampling.
pub const MAX_CANDIDATES: usize = 1_000_000;
/// Minimum acceptance rate once [`MAX_CANDIDATES`] have been drawn.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Latin hypercube sample of `n` points in the box `[lo, hi]`: every axis has
/// exactly one point in each of its `n` strata.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, lo: Point, hi: Point, rng: &mut R) -> Vec<Point> {
    let mut axes = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for (axis, vals) in axes.iter_mut().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        let w = hi[axis] - lo[axis];
        for s in strata {
            let u: f64 = rng.gen();
            // Clamp guards against rounding up to the next stratum's edge.
            let t = ((s as f64 + u) / n as f64).min(f64::from_bits((1.0f64).to_bits() - 1));
            vals.push(lo[axis] + t * w);
        }
    }
    axes[0].iter().zip(&axes[1]).map(|(&x, &y)| [x, y]).collect()
}

/// [`latin_hypercube`] with a fresh generator seeded by `seed`.
pub fn latin_hypercube_seeded(n: usize, lo: Point, hi: Point, seed: u64) -> Vec<Point> {
    latin_hypercube(n, lo, hi, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Exactly `n` points satisfying `accept`, from LHS batches over `[lo, hi]`
/// filtered by the predicate.
pub fn sample_region<F, R>(accept: F, n: usize, lo: Point, hi: Point, rng: &mut R) -> Result<Vec<Point>, SamplingError>
where
    F: Fn(Point) -> bool,
    R: Rng + ?Sized,
{
    let mut out = Vec::with_capacity(n);
    let mut candidates = 0usize;
    while out.len() < n {
        if candidates >= MAX_CANDIDATES && (out.len() as f64) < MIN_ACCEPTANCE * candidates as f64 {
            return Err(SamplingError::Failure {
                accepted: out.len(),
                candidates,
            });
        }
        let missing = n - out.len();
        let rate = if out.is_empty() {
            0.5
        } else {
            (out.len() as f64 / candidates as f64).max(MIN_ACCEPTANCE)
        };
        let batch = ((1.2 * missing as f64 / rate).ceil() as usize).clamp(16, 100_000);
        for p in latin_hypercube(batch, lo, hi, rng) {
            if out.len() < n && accept(p) {
                out.push(p);
            }
        }
        candidates += batch;
    }
    Ok(out)
}

/// Points on a curve with their unit normals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveSamples {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
}

/// `n` points spread uniformly by arc length along `poly` (systematic sampling
/// with one random offset), mapped back onto the exact curve.
pub fn sample_curve<R: Rng + ?Sized>(poly: &InterfacePolyline, n: usize, rng: &mut R) -> CurveSamples {
    let len = poly.length();
    let offset: f64 = rng.gen();
    let mut out = CurveSamples {
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
    };
    for k in 0..n {
        let theta = poly.param_at_arc((k as f64 + offset) / n as f64 * len);
        out.points.push(poly.curve.point_at(theta));
        out.normals.push(poly.curve.normal_at(theta));
    }
    out
}

/// Samples several curves jointly, splitting `n` by arc length.
fn sample_curves<R: Rng + ?Sized>(curves: &[Region], n: usize, rng: &mut R) -> Result<CurveSamples, SamplingError> {
    if n == 0 {
        return Ok(CurveSamples::default());
    }
    if curves.is_empty() {
        return Err(SamplingError::Invalid(format!("{n} boundary points requested but the boundary is empty")));
    }
    let polys = curves
        .iter()
        .map(|c| discretize(c, DEFAULT_RESOLUTION))
        .collect::<Result<Vec<_>, _>>()?;
    let total: f64 = polys.iter().map(|p| p.length()).sum();
    let mut out = CurveSamples::default();
    let mut assigned = 0;
    for (i, poly) in polys.iter().enumerate() {
        let count = if i + 1 == polys.len() {
            n - assigned
        } else {
            ((poly.length() / total) * n as f64).round() as usize
        };
        assigned += count;
        let s = sample_curve(poly, count, rng);
        out.points.extend(s.points);
        out.normals.extend(s.normals);
    }
    Ok(out)
}

/// Box in which to draw candidates for one subdomain.
fn candidate_box(decomp: &DomainDecomposition, side: Side) -> (Point, Point) {
    let (lo, hi) = decomp.bounding_box();
    match side {
        Side::Side2 => (lo, hi),
        Side::Side1 => {
            let (glo, ghi) = decomp.gamma.bounding_box();
            ([lo[0].max(glo[0]), lo[1].max(glo[1])], [hi[0].min(ghi[0]), hi[1].min(ghi[1])])
        }
    }
}

/// `n` points strictly inside one subdomain.
pub fn sample_subdomain<R: Rng + ?Sized>(
    decomp: &DomainDecomposition,
    side: Side,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Point>, SamplingError> {
    let want = match side {
        Side::Side1 => Membership::Inside1,
        Side::Side2 => Membership::Inside2,
    };
    let (lo, hi) = candidate_box(decomp, side);
    sample_region(|p| decomp.contains(p) == Ok(want), n, lo, hi, rng)
}

/// Requested point counts per set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub n_interior1: usize,
    pub n_interior2: usize,
    pub n_interface: usize,
    pub n_boundary1: usize,
    pub n_boundary2: usize,
}

/// Tagged training points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollocationSet {
    pub interior1: Vec<Point>,
    pub interior2: Vec<Point>,
    pub interface: Vec<Point>,
    /// Ω₁→Ω₂ unit normal at each interface point.
    pub normals: Vec<Point>,
    pub boundary1: Vec<Point>,
    pub boundary2: Vec<Point>,
    pub seed: u64,
}

/// Independent generator for stream `k` of `seed`.
pub fn substream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

impl CollocationSet {
    pub fn generate(decomp: &DomainDecomposition, plan: &SamplingPlan, seed: u64) -> Result<Self, SamplingError> {
        let interior1 = sample_subdomain(decomp, Side::Side1, plan.n_interior1, &mut substream(seed, 1))?;
        let interior2 = sample_subdomain(decomp, Side::Side2, plan.n_interior2, &mut substream(seed, 2))?;
        let gamma = sample_curve(decomp.gamma_polyline(), plan.n_interface, &mut substream(seed, 3));
        let b1 = sample_curves(&decomp.boundary1_curves(), plan.n_boundary1, &mut substream(seed, 4))?;
        let b2 = sample_curves(&[decomp.boundary2_curve()], plan.n_boundary2, &mut substream(seed, 5))?;
        Ok(Self {
            interior1,
            interior2,
            interface: gamma.points,
            normals: gamma.normals,
            boundary1: b1.points,
            boundary2: b2.points,
            seed,
        })
    }

    pub fn interior(&self, side: Side) -> &[Point] {
        match side {
            Side::Side1 => &self.interior1,
            Side::Side2 => &self.interior2,
        }
    }

    pub fn interior_mut(&mut self, side: Side) -> &mut Vec<Point> {
        match side {
            Side::Side1 => &mut self.interior1,
            Side::Side2 => &mut self.interior2,
        }
    }

    pub fn boundary(&self, side: Side) -> &[Point] {
        match side {
            Side::Side1 => &self.boundary1,
            Side::Side2 => &self.boundary2,
        }
    }
}

/// RAR-D hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RardConfig {
    pub k: f64,
    pub c: f64,
    pub warmup_steps: usize,
    pub resample_period: usize,
    /// Fresh uniform points added to the pool, as a multiple of the set size.
    #[serde(default = "default_pool_multiplier")]
    pub pool_multiplier: usize,
}

fn default_pool_multiplier() -> usize {
    1
}

impl RardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(format!("rard.k must be a finite value >= 0, got {}", self.k));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(format!("rard.c must be a finite value >= 0, got {}", self.c));
        }
        if self.resample_period == 0 {
            return Err("rard.resample_period must be at least 1".into());
        }
        Ok(())
    }

    /// Whether step `t` (after `t` optimizer steps) triggers resampling.
    pub fn is_event(&self, t: usize, total: usize) -> bool {
        t > self.warmup_steps && t < total && (t - self.warmup_steps).is_multiple_of(self.resample_period)
    }
}

/// Normalized RAR-D sampling probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    pub probs: Vec<f64>,
    /// Set when every residual vanished with `c = 0`.
    pub uniform_fallback: bool,
}

/// `p̃_i ∝ ϖ_i^k / mean_j ϖ_j^k + c`, normalized to sum to one.
pub fn rard_density(residuals: &[f64], k: f64, c: f64) -> Result<Density, SamplingError> {
    if residuals.is_empty() {
        return Ok(Density {
            probs: Vec::new(),
            uniform_fallback: false,
        });
    }
    if residuals.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(SamplingError::InvalidResiduals);
    }
    let n = residuals.len() as f64;
    let powered: Vec<f64> = residuals.iter().map(|r| r.powf(k)).collect();
    let mean = powered.iter().sum::<f64>() / n;
    if !(mean > 0.0) || !mean.is_finite() {
        return Ok(Density {
            probs: vec![1.0 / n; residuals.len()],
            uniform_fallback: c == 0.0,
        });
    }
    let p: Vec<f64> = powered.iter().map(|w| w / mean + c).collect();
    let total: f64 = p.iter().sum();
    Ok(Density {
        probs: p.iter().map(|v| v / total).collect(),
        uniform_fallback: false,
    })
}

/// Indices of `m` draws without replacement with probabilities proportional
/// to `weights` (keys `ln(u)/w`, largest first).
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(weights: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, i)
        })
        .collect();
    // Zero-weight entries come last in a random order.
    keyed.shuffle(rng);
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    keyed.into_iter().take(m).map(|(_, i)| i).collect()
}

/// Summary of one resampling event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleStats {
    pub pool_size: usize,
    pub max_before: f64,
    pub mean_before: f64,
    pub max_after: f64,
    pub mean_after: f64,
    pub uniform_fallback: bool,
}

fn max_mean(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let max = v.iter().cloned().fold(0.0, f64::max);
    (max, v.iter().sum::<f64>() / v.len() as f64)
}

/// Redraws `current` from the pool `current ∪ fresh` according to
/// [`rard_density`]; `residuals` evaluates `ϖ` on the pool.
pub fn rard_resample<R, S, E>(
    current: &[Point],
    fresh: S,
    residuals: E,
    cfg: &RardConfig,
    rng: &mut R,
) -> Result<(Vec<Point>, ResampleStats), SamplingError>
where
    R: Rng + ?Sized,
    S: FnOnce(usize, &mut R) -> Result<Vec<Point>, SamplingError>,
    E: FnOnce(&[Point]) -> Vec<f64>,
{
    let n = current.len();
    let mut pool = current.to_vec();
    pool.extend(fresh(cfg.pool_multiplier * n, rng)?);
    let res = residuals(&pool);
    if res.len() != pool.len() {
        return Err(SamplingError::InvalidResiduals);
    }
    let density = rard_density(&res, cfg.k, cfg.c)?;
    let picks = weighted_sample_without_replacement(&density.probs, n, rng);
    let (max_before, mean_before) = max_mean(&res[..n]);
    let chosen: Vec<f64> = picks.iter().map(|&i| res[i]).collect();
    let (max_after, mean_after) = max_mean(&chosen);
    Ok((
        picks.iter().map(|&i| pool[i]).collect(),
        ResampleStats {
            pool_size: pool.len(),
            max_before,
            mean_before,
            max_after,
            mean_after,
            uniform_fallback: density.uniform_fallback,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{ProblemDefinition, ProblemId};

    #[test]
    fn lhs_one_point_per_stratum() {
        let pts = latin_hypercube_seeded(100, [0.0, 0.0], [1.0, 1.0], 9);
        for axis in 0..2 {
            let mut bins = [0; 100];
            for p in &pts {
                bins[(p[axis] * 100.0) as usize] += 1;
            }
            assert!(bins.iter().all(|&b| b == 1));
        }
    }

    #[test]
    fn single_lhs_point_in_unit_box() {
        let p = latin_hypercube_seeded(1, [0.0, 0.0], [1.0, 1.0], 0);
        assert!(p.len() == 1 && (0.0..1.0).contains(&p[0][0]) && (0.0..1.0).contains(&p[0][1]));
    }

    #[test]
    fn empty_predicate_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = sample_region(|_| false, 10, [0.0, 0.0], [1.0, 1.0], &mut rng);
        assert!(matches!(r, Err(SamplingError::Failure { accepted: 0, .. })));
    }

    #[test]
    fn e1_disk_sampling() {
        let e1 = ProblemDefinition::builtin(ProblemId::E1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_subdomain(&e1.decomposition, Side::Side1, 200, &mut rng).unwrap();
        assert_eq!(pts.len(), 200);
        assert!(pts.iter().all(|&p| e1.decomposition.contains(p) == Ok(Membership::Inside1)));
    }

    #[test]
    fn circle_curve_samples_are_evenly_spaced() {
        let poly = discretize(
            &Region::Circle {
                center: [0.0, 0.0],
                radius: 0.5,
            },
            4096,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample_curve(&poly, 4, &mut rng);
        for i in 0..4 {
            let a = s.points[i];
            let b = s.points[(i + 1) % 4];
            let cos = (a[0] * b[0] + a[1] * b[1]) / 0.25;
            let arc = 0.5 * cos.clamp(-1.0, 1.0).acos();
            assert!((arc - 0.5 * std::f64::consts::FRAC_PI_2).abs() < 1e-6, "{arc}");
        }
    }

    #[test]
    fn density_hand_case() {
        let d = rard_density(&[1.0, 2.0], 2.0, 0.0).unwrap();
        assert!((d.probs[0] - 0.2).abs() < 1e-15 && (d.probs[1] - 0.8).abs() < 1e-15);
        let d = rard_density(&[1.0, 2.0], 0.0, 0.0).unwrap();
        assert_eq!(d.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn zero_residuals_fall_back_to_uniform() {
        let d = rard_density(&[0.0; 4], 2.0, 0.0).unwrap();
        assert!(d.uniform_fallback);
        assert_eq!(d.probs, vec![0.25; 4]);
        assert!(rard_density(&[1.0, f64::NAN], 2.0, 0.0).is_err());
    }

    #[test]
    fn uniform_residuals_without_fresh_points_permute() {
        let current: Vec<Point> = (0..20).map(|i| [i as f64, 0.0]).collect();
        let cfg = RardConfig {
            k: 2.0,
            c: 0.0,
            warmup_steps: 0,
            resample_period: 1,
            pool_multiplier: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (out, stats) = rard_resample(&current, |_, _| Ok(vec![]), |p| vec![1.0; p.len()], &cfg, &mut rng).unwrap();
        let mut xs: Vec<f64> = out.iter().map(|p| p[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, (0..20).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(stats.pool_size, 20);
    }

    #[test]
    fn event_schedule() {
        let cfg = RardConfig {
            k: 2.0,
            c: 0.0,
            warmup_steps: 20,
            resample_period: 5,
            pool_multiplier: 1,
        };
        let events: Vec<usize> = (0..=40).filter(|&t| cfg.is_event(t, 40)).collect();
        assert_eq!(events, vec![25, 30, 35]);
    }
}

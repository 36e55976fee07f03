//! Region membership, curve parametrizations, unit normals and polylines for the
//! benchmark geometries.
//!
//! Every closed curve is parametrized over `θ ∈ [0, 2π)` and traversed
//! counter-clockwise, so the outward normal of the enclosed region is the tangent
//! rotated clockwise. For the interface Γ the enclosed region is Ω₁, which makes
//! the outward normal the Ω₁ → Ω₂ normal used by the jump conditions.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the plane.
pub type Point = [f64; 2];

/// Distance below which a point is classified as lying on Γ.
pub const ON_GAMMA_TOL: f64 = 1e-10;
/// Distance below which a point is accepted as an interface point by [`unit_normal`].
pub const ON_CURVE_TOL: f64 = 1e-8;
/// Default vertex count of interface polylines.
pub const DEFAULT_RESOLUTION: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid point ({0}, {1}): coordinates must be finite")]
    InvalidPoint(f64, f64),
    #[error("point ({x}, {y}) is not on the interface (distance {distance:e})")]
    OffInterface { x: f64, y: f64, distance: f64 },
    #[error("degenerate curve: {0}")]
    Degenerate(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
}

/// One Fourier mode `s·sin(kθ) + c·cos(kθ)` of a polar radius function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarTerm {
    pub freq: f64,
    pub sin: f64,
    pub cos: f64,
}

/// One mode `β·cos(n(θ − θ₀))` of a star-shaped level set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarMode {
    pub n: f64,
    pub beta: f64,
    pub theta: f64,
}

/// A planar region or closed curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Circle { center: Point, radius: f64 },
    /// Signed polar radius `r(θ) = (a + b cos(mθ)) sin(nθ)`.
    ParametricCurve { a: f64, b: f64, m: f64, n: f64 },
    /// Fourier polar radius `r(θ) = c₀ + Σ (s_k sin kθ + c_k cos kθ)`; with
    /// `clip_negative` the radius is replaced by `max(r, 0)`.
    PolarCurve {
        constant: f64,
        terms: Vec<PolarTerm>,
        clip_negative: bool,
    },
    /// Zero set of `φ(x, y) = ρ − r₀(1 + Σ β_k cos(n_k(θ − θ_k)))`.
    LevelSetStar { r0: f64, modes: Vec<StarMode> },
    AxisAlignedBox { min: Point, max: Point },
    Annulus { r_in: f64, r_out: f64 },
}

/// Classification of a point against a [`DomainDecomposition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Membership {
    Inside1,
    Inside2,
    OnGamma,
    Outside,
}

fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

fn polar_angle(p: Point) -> f64 {
    p[1].atan2(p[0])
}

impl Region {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: &str| Err(GeometryError::InvalidRegion(msg.to_string()));
        match self {
            Region::Circle { radius, center } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return bad("circle radius must be positive");
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return bad("circle center must be finite");
                }
            }
            Region::Annulus { r_in, r_out } => {
                if !(0.0 < *r_in && r_in < r_out) || !r_out.is_finite() {
                    return bad("annulus requires 0 < r_in < r_out");
                }
            }
            Region::AxisAlignedBox { min, max } => {
                if !(min[0] < max[0] && min[1] < max[1]) {
                    return bad("box requires min < max on both axes");
                }
            }
            Region::LevelSetStar { r0, .. } => {
                if !(*r0 > 0.0) {
                    return bad("level-set star requires r0 > 0");
                }
            }
            Region::ParametricCurve { a, b, m, n } => {
                if ![a, b, m, n].iter().all(|v| v.is_finite()) {
                    return bad("parametric curve coefficients must be finite");
                }
                if m.fract() != 0.0 || n.fract() != 0.0 {
                    return bad("parametric curve frequencies must be integers");
                }
            }
            Region::PolarCurve { terms, .. } => {
                if terms.iter().any(|t| t.freq.fract() != 0.0) {
                    return bad("polar curve frequencies must be integers");
                }
            }
        }
        // Closedness of parametrized curves.
        if self.is_curve() {
            let a = self.point_at(0.0);
            let b = self.point_at(TAU);
            if norm([a[0] - b[0], a[1] - b[1]]) > 1e-12 {
                return bad("curve is not closed over [0, 2π]");
            }
        }
        Ok(())
    }

    /// Whether the region has a single closed boundary curve parametrized by `θ`.
    pub fn is_curve(&self) -> bool {
        !matches!(self, Region::Annulus { .. })
    }

    /// Signed polar radius for the polar-type curves.
    fn polar_radius(&self, theta: f64) -> Option<(f64, f64)> {
        match self {
            Region::ParametricCurve { a, b, m, n } => {
                let amp = a + b * (m * theta).cos();
                let damp = -b * m * (m * theta).sin();
                let s = (n * theta).sin();
                let ds = n * (n * theta).cos();
                Some((amp * s, damp * s + amp * ds))
            }
            Region::PolarCurve {
                constant,
                terms,
                clip_negative,
            } => {
                let mut r = *constant;
                let mut dr = 0.0;
                for t in terms {
                    let (s, c) = (t.freq * theta).sin_cos();
                    r += t.sin * s + t.cos * c;
                    dr += t.freq * (t.sin * c - t.cos * s);
                }
                if *clip_negative && r <= 0.0 {
                    Some((0.0, 0.0))
                } else {
                    Some((r, dr))
                }
            }
            Region::LevelSetStar { r0, modes } => {
                let mut r = 1.0;
                let mut dr = 0.0;
                for md in modes {
                    let arg = md.n * (theta - md.theta);
                    r += md.beta * arg.cos();
                    dr -= md.beta * md.n * arg.sin();
                }
                Some((r0 * r, r0 * dr))
            }
            Region::Circle { radius, .. } => Some((*radius, 0.0)),
            _ => None,
        }
    }

    /// Point of the boundary curve at parameter `θ`.
    pub fn point_at(&self, theta: f64) -> Point {
        match self {
            Region::Circle { center, radius } => {
                let (s, c) = theta.sin_cos();
                [center[0] + radius * c, center[1] + radius * s]
            }
            Region::AxisAlignedBox { min, max } => {
                let (p, _) = box_perimeter(min, max, theta);
                p
            }
            Region::Annulus { r_out, .. } => {
                let (s, c) = theta.sin_cos();
                [r_out * c, r_out * s]
            }
            _ => {
                let (r, _) = self.polar_radius(theta).unwrap();
                let (s, c) = theta.sin_cos();
                [r * c, r * s]
            }
        }
    }

    /// Derivative `dP/dθ` of the boundary parametrization.
    pub fn derivative_at(&self, theta: f64) -> Point {
        match self {
            Region::Circle { radius, .. } => {
                let (s, c) = theta.sin_cos();
                [-radius * s, radius * c]
            }
            Region::AxisAlignedBox { min, max } => {
                let (_, d) = box_perimeter(min, max, theta);
                d
            }
            Region::Annulus { r_out, .. } => {
                let (s, c) = theta.sin_cos();
                [-r_out * s, r_out * c]
            }
            _ => {
                let (r, dr) = self.polar_radius(theta).unwrap();
                let (s, c) = theta.sin_cos();
                [dr * c - r * s, dr * s + r * c]
            }
        }
    }

    /// Outward unit normal at parameter `θ`.
    pub fn normal_at(&self, theta: f64) -> Point {
        if let Region::LevelSetStar { .. } = self {
            let g = self.level_set_gradient(self.point_at(theta));
            let len = norm(g);
            return [g[0] / len, g[1] / len];
        }
        let d = self.derivative_at(theta);
        let len = norm(d);
        if len < 1e-14 {
            // Stationary parameter (cusp through the origin); fall back to a chord.
            let h = 1e-6;
            let a = self.point_at(theta - h);
            let b = self.point_at(theta + h);
            let t = [b[0] - a[0], b[1] - a[1]];
            let l = norm(t);
            return [t[1] / l, -t[0] / l];
        }
        [d[1] / len, -d[0] / len]
    }

    /// Level-set function value; negative inside.
    pub fn level_set(&self, p: Point) -> Option<f64> {
        match self {
            Region::LevelSetStar { .. } => {
                let (r, _) = self.polar_radius(polar_angle(p)).unwrap();
                Some(norm(p) - r)
            }
            Region::Circle { center, radius } => {
                Some(norm([p[0] - center[0], p[1] - center[1]]) - radius)
            }
            _ => None,
        }
    }

    fn level_set_gradient(&self, p: Point) -> Point {
        match self {
            Region::LevelSetStar { .. } => {
                let rho2 = p[0] * p[0] + p[1] * p[1];
                let rho = rho2.sqrt();
                let (_, dr) = self.polar_radius(polar_angle(p)).unwrap();
                // ∇ρ = p/ρ, ∇θ = (−y, x)/ρ²
                [
                    p[0] / rho + dr * p[1] / rho2,
                    p[1] / rho - dr * p[0] / rho2,
                ]
            }
            Region::Circle { center, .. } => {
                let d = [p[0] - center[0], p[1] - center[1]];
                let l = norm(d);
                [d[0] / l, d[1] / l]
            }
            _ => unreachable!("gradient requested for a region without a level set"),
        }
    }

    /// Curve parameter whose point is nearest to `p`, for curves where this is
    /// recoverable from the polar angle. Returns `(θ, distance)`.
    pub fn locate(&self, p: Point) -> (f64, f64) {
        let dist = |theta: f64| {
            let q = self.point_at(theta);
            norm([q[0] - p[0], q[1] - p[1]])
        };
        match self {
            Region::AxisAlignedBox { min, max } => {
                let (theta, d) = box_locate(min, max, p);
                (theta, d)
            }
            Region::Circle { center, .. } => {
                let theta = polar_angle([p[0] - center[0], p[1] - center[1]]).rem_euclid(TAU);
                (theta, dist(theta))
            }
            _ => {
                let alpha = polar_angle(p).rem_euclid(TAU);
                let beta = (alpha + PI).rem_euclid(TAU);
                let (da, db) = (dist(alpha), dist(beta));
                if da <= db {
                    (alpha, da)
                } else {
                    (beta, db)
                }
            }
        }
    }

    /// Distance-like measure from `p` to the boundary curve(s).
    pub fn curve_distance(&self, p: Point) -> f64 {
        match self {
            Region::Annulus { r_in, r_out } => {
                let rho = norm(p);
                (rho - r_in).abs().min((rho - r_out).abs())
            }
            Region::LevelSetStar { .. } => {
                // |ρ − r(θ)| scaled by the curve's local slope; equals
                // |φ|/|∇φ| on the curve and stays bounded near the origin.
                let (r, dr) = self.polar_radius(polar_angle(p)).unwrap();
                (norm(p) - r).abs() / (1.0 + (dr / r).powi(2)).sqrt()
            }
            Region::Circle { .. } => self.level_set(p).unwrap().abs(),
            _ => self.locate(p).1,
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Region::Circle { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Region::AxisAlignedBox { min, max } => (*min, *max),
            Region::Annulus { r_out, .. } => ([-r_out, -r_out], [*r_out, *r_out]),
            _ => {
                let n = 8192;
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for i in 0..n {
                    let q = self.point_at(TAU * i as f64 / n as f64);
                    for k in 0..2 {
                        lo[k] = lo[k].min(q[k]);
                        hi[k] = hi[k].max(q[k]);
                    }
                }
                let pad = 1e-3 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
                (
                    [lo[0] - pad, lo[1] - pad],
                    [hi[0] + pad, hi[1] + pad],
                )
            }
        }
    }

    /// Closed-region membership for outer domains (boundary included).
    fn contains_closed(&self, p: Point) -> bool {
        match self {
            Region::AxisAlignedBox { min, max } => {
                p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1]
            }
            Region::Annulus { r_in, r_out } => {
                let rho = norm(p);
                rho >= *r_in && rho <= *r_out
            }
            Region::Circle { .. } => self.level_set(p).unwrap() <= 0.0,
            _ => false,
        }
    }

    /// Boundary curves of an outer domain: `(outer, inner)`.
    pub fn boundary_curves(&self) -> (Region, Option<Region>) {
        match self {
            Region::Annulus { r_in, r_out } => (
                Region::Circle {
                    center: [0.0, 0.0],
                    radius: *r_out,
                },
                Some(Region::Circle {
                    center: [0.0, 0.0],
                    radius: *r_in,
                }),
            ),
            other => (other.clone(), None),
        }
    }
}

fn box_perimeter(min: &Point, max: &Point, theta: f64) -> (Point, Point) {
    let w = max[0] - min[0];
    let h = max[1] - min[1];
    let per = 2.0 * (w + h);
    let scale = per / TAU;
    let mut s = theta.rem_euclid(TAU) * scale;
    if s < w {
        return ([min[0] + s, min[1]], [scale, 0.0]);
    }
    s -= w;
    if s < h {
        return ([max[0], min[1] + s], [0.0, scale]);
    }
    s -= h;
    if s < w {
        return ([max[0] - s, max[1]], [-scale, 0.0]);
    }
    s -= w;
    ([min[0], max[1] - s], [0.0, -scale])
}

fn box_locate(min: &Point, max: &Point, p: Point) -> (f64, f64) {
    let w = max[0] - min[0];
    let h = max[1] - min[1];
    let per = 2.0 * (w + h);
    let cx = p[0].clamp(min[0], max[0]);
    let cy = p[1].clamp(min[1], max[1]);
    // Candidate projections onto each edge, as (arc position, distance).
    let cands = [
        (cx - min[0], (p[1] - min[1]).hypot(p[0] - cx)),
        (w + cy - min[1], (p[0] - max[0]).hypot(p[1] - cy)),
        (w + h + max[0] - cx, (p[1] - max[1]).hypot(p[0] - cx)),
        (2.0 * w + h + max[1] - cy, (p[0] - min[0]).hypot(p[1] - cy)),
    ];
    let (s, d) = cands
        .iter()
        .copied()
        .fold((0.0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    ((s / per * TAU).rem_euclid(TAU), d)
}

/// Checks `p` for finite coordinates.
pub fn check_point(p: Point) -> Result<(), GeometryError> {
    if p[0].is_finite() && p[1].is_finite() {
        Ok(())
    } else {
        Err(GeometryError::InvalidPoint(p[0], p[1]))
    }
}

/// Dense closed polyline approximating a curve, with vertices spaced uniformly
/// in arc length.
#[derive(Clone, Debug)]
pub struct InterfacePolyline {
    pub vertices: Vec<Point>,
    pub tangents: Vec<Point>,
    /// Curve parameter of each vertex, increasing in `[0, 2π)`.
    pub params: Vec<f64>,
    pub resolution: usize,
    pub curve: Region,
    /// Cumulative arc length at each vertex; the last entry closes the loop.
    cumulative: Vec<f64>,
    slabs: SlabIndex,
}

#[derive(Clone, Debug)]
struct SlabIndex {
    y0: f64,
    dy: f64,
    bins: Vec<Vec<u32>>,
}

impl SlabIndex {
    fn build(vertices: &[Point]) -> Self {
        let n = vertices.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in vertices {
            lo = lo.min(v[1]);
            hi = hi.max(v[1]);
        }
        let nbins = (n / 8).clamp(1, 1024);
        let span = (hi - lo).max(1e-300);
        let dy = span / nbins as f64;
        let mut bins = vec![Vec::new(); nbins];
        for i in 0..n {
            let a = vertices[i][1];
            let b = vertices[(i + 1) % n][1];
            let (ya, yb) = (a.min(b), a.max(b));
            let i0 = (((ya - lo) / dy).floor() as isize).clamp(0, nbins as isize - 1) as usize;
            let i1 = (((yb - lo) / dy).floor() as isize).clamp(0, nbins as isize - 1) as usize;
            for bin in &mut bins[i0..=i1] {
                bin.push(i as u32);
            }
        }
        Self { y0: lo, dy, bins }
    }

    fn candidates(&self, y: f64) -> &[u32] {
        let k = ((y - self.y0) / self.dy).floor();
        if k < 0.0 || k as usize >= self.bins.len() {
            // Above or below every segment, except the exact top edge.
            if k as usize == self.bins.len() {
                return &self.bins[self.bins.len() - 1];
            }
            return &[];
        }
        &self.bins[k as usize]
    }
}

/// Discretizes a closed curve into `resolution` vertices spaced uniformly by arc
/// length, starting at `θ = 0`.
pub fn discretize(curve: &Region, resolution: usize) -> Result<InterfacePolyline, GeometryError> {
    if resolution < 3 {
        return Err(GeometryError::Degenerate(format!(
            "resolution {resolution} is below 3 vertices"
        )));
    }
    if !curve.is_curve() {
        return Err(GeometryError::InvalidRegion(
            "annulus has two boundary curves; discretize each circle".into(),
        ));
    }
    let fine = (16 * resolution).max(16384);
    let mut thetas = Vec::with_capacity(fine + 1);
    let mut cum = Vec::with_capacity(fine + 1);
    let mut prev = curve.point_at(0.0);
    let mut acc = 0.0;
    thetas.push(0.0);
    cum.push(0.0);
    for i in 1..=fine {
        let t = TAU * i as f64 / fine as f64;
        let q = curve.point_at(t);
        acc += norm([q[0] - prev[0], q[1] - prev[1]]);
        thetas.push(t);
        cum.push(acc);
        prev = q;
    }
    let total = acc;
    if !(total > 1e-12) {
        return Err(GeometryError::Degenerate("curve has zero length".into()));
    }
    let mut params = Vec::with_capacity(resolution);
    let mut j = 0;
    for k in 0..resolution {
        let s = total * k as f64 / resolution as f64;
        while j + 1 < fine && cum[j + 1] <= s {
            j += 1;
        }
        let seg = cum[j + 1] - cum[j];
        let f = if seg > 0.0 { (s - cum[j]) / seg } else { 0.0 };
        params.push(thetas[j] + f * (thetas[j + 1] - thetas[j]));
    }
    let vertices: Vec<Point> = params.iter().map(|&t| curve.point_at(t)).collect();
    let tangents: Vec<Point> = params
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let d = curve.derivative_at(t);
            let l = norm(d);
            if l > 1e-14 {
                [d[0] / l, d[1] / l]
            } else {
                let a = vertices[(i + resolution - 1) % resolution];
                let b = vertices[(i + 1) % resolution];
                let c = [b[0] - a[0], b[1] - a[1]];
                let l = norm(c).max(1e-300);
                [c[0] / l, c[1] / l]
            }
        })
        .collect();
    let mut cumulative = Vec::with_capacity(resolution + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 0..resolution {
        let a = vertices[i];
        let b = vertices[(i + 1) % resolution];
        acc += norm([b[0] - a[0], b[1] - a[1]]);
        cumulative.push(acc);
    }
    let slabs = SlabIndex::build(&vertices);
    Ok(InterfacePolyline {
        vertices,
        tangents,
        params,
        resolution,
        curve: curve.clone(),
        cumulative,
        slabs,
    })
}

impl InterfacePolyline {
    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Signed area enclosed by the polyline (positive for counter-clockwise).
    pub fn enclosed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    /// Winding number of the polyline around `p`.
    pub fn winding_number(&self, p: Point) -> i32 {
        let n = self.vertices.len();
        let mut wn = 0;
        for &i in self.slabs.candidates(p[1]) {
            let a = self.vertices[i as usize];
            let b = self.vertices[(i as usize + 1) % n];
            let side = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
            if a[1] <= p[1] {
                if b[1] > p[1] && side > 0.0 {
                    wn += 1;
                }
            } else if b[1] <= p[1] && side < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    /// Maps an arc-length position (taken modulo the length) to a curve parameter.
    pub fn param_at_arc(&self, s: f64) -> f64 {
        let total = self.length();
        let s = s.rem_euclid(total);
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(k) => k.min(self.resolution - 1),
            Err(k) => k - 1,
        };
        let seg = self.cumulative[k + 1] - self.cumulative[k];
        let f = if seg > 0.0 {
            (s - self.cumulative[k]) / seg
        } else {
            0.0
        };
        let t0 = self.params[k];
        let t1 = if k + 1 < self.resolution {
            self.params[k + 1]
        } else {
            TAU
        };
        t0 + f * (t1 - t0)
    }

    /// Whether no two non-adjacent segments intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let seg = |i: usize| (self.vertices[i], self.vertices[(i + 1) % n]);
        for i in 0..n {
            let (a, b) = seg(i);
            let (ax0, ax1) = (a[0].min(b[0]), a[0].max(b[0]));
            let (ay0, ay1) = (a[1].min(b[1]), a[1].max(b[1]));
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = seg(j);
                if c[0].max(d[0]) < ax0
                    || c[0].min(d[0]) > ax1
                    || c[1].max(d[1]) < ay0
                    || c[1].min(d[1]) > ay1
                {
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    (d1 == 0.0 && on(c, d, a))
        || (d2 == 0.0 && on(c, d, b))
        || (d3 == 0.0 && on(a, b, c))
        || (d4 == 0.0 && on(a, b, d))
}

/// Decomposition of the computational domain by the interface Γ into Ω₁ (inside
/// Γ, minus holes) and Ω₂ (the rest of Ω).
#[derive(Clone, Debug)]
pub struct DomainDecomposition {
    pub omega: Region,
    pub gamma: Region,
    pub holes: Vec<Region>,
    gamma_polyline: InterfacePolyline,
    hole_polylines: Vec<InterfacePolyline>,
}

impl DomainDecomposition {
    pub fn new(omega: Region, gamma: Region, holes: Vec<Region>) -> Result<Self, GeometryError> {
        omega.validate()?;
        gamma.validate()?;
        if !matches!(
            omega,
            Region::AxisAlignedBox { .. } | Region::Annulus { .. } | Region::Circle { .. }
        ) {
            return Err(GeometryError::InvalidRegion(
                "outer domain must be a box, circle or annulus".into(),
            ));
        }
        let gamma_polyline = discretize(&gamma, DEFAULT_RESOLUTION)?;
        let mut hole_polylines = Vec::with_capacity(holes.len());
        for h in &holes {
            h.validate()?;
            hole_polylines.push(discretize(h, DEFAULT_RESOLUTION)?);
        }
        let dd = Self {
            omega,
            gamma,
            holes,
            gamma_polyline,
            hole_polylines,
        };
        // Γ must sit inside Ω.
        for k in 0..1024 {
            let p = dd.gamma.point_at(TAU * k as f64 / 1024.0);
            if !dd.omega.contains_closed(p) || dd.omega.curve_distance(p) < 1e-12 {
                return Err(GeometryError::InvalidRegion(
                    "interface leaves the outer domain".into(),
                ));
            }
        }
        Ok(dd)
    }

    pub fn gamma_polyline(&self) -> &InterfacePolyline {
        &self.gamma_polyline
    }

    pub fn hole_polylines(&self) -> &[InterfacePolyline] {
        &self.hole_polylines
    }

    /// Strict enclosure by Γ, ignoring holes and the outer domain.
    pub fn inside_gamma(&self, p: Point) -> bool {
        region_encloses(&self.gamma, &self.gamma_polyline, p)
    }

    fn in_hole(&self, p: Point) -> bool {
        self.holes
            .iter()
            .zip(&self.hole_polylines)
            .any(|(h, poly)| region_encloses(h, poly, p))
    }

    /// Classifies `p` into Ω₁, Ω₂, Γ, or outside Ω.
    pub fn contains(&self, p: Point) -> Result<Membership, GeometryError> {
        check_point(p)?;
        if self.gamma.curve_distance(p) < ON_GAMMA_TOL {
            return Ok(Membership::OnGamma);
        }
        if !self.omega.contains_closed(p) || self.in_hole(p) {
            return Ok(Membership::Outside);
        }
        Ok(if self.inside_gamma(p) {
            Membership::Inside1
        } else {
            Membership::Inside2
        })
    }

    /// Bounding box of Ω.
    pub fn bounding_box(&self) -> (Point, Point) {
        self.omega.bounding_box()
    }

    /// Boundary curves of Ω₁ away from Γ (holes and inner annulus circle).
    pub fn boundary1_curves(&self) -> Vec<Region> {
        let mut out = Vec::new();
        if let (_, Some(inner)) = self.omega.boundary_curves() {
            out.push(inner);
        }
        out.extend(self.holes.iter().cloned());
        out
    }

    /// Outer boundary curve of Ω₂.
    pub fn boundary2_curve(&self) -> Region {
        self.omega.boundary_curves().0
    }
}

fn region_encloses(region: &Region, poly: &InterfacePolyline, p: Point) -> bool {
    match region {
        Region::Circle { .. } | Region::LevelSetStar { .. } => region.level_set(p).unwrap() < 0.0,
        Region::AxisAlignedBox { min, max } => {
            p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1]
        }
        Region::Annulus { r_in, r_out } => {
            let rho = norm(p);
            rho > *r_in && rho < *r_out
        }
        Region::ParametricCurve { .. } | Region::PolarCurve { .. } => poly.winding_number(p) != 0,
    }
}

/// Unit normal of Γ at a point on Γ, oriented from Ω₁ into Ω₂.
pub fn unit_normal(gamma: &Region, p: Point) -> Result<Point, GeometryError> {
    check_point(p)?;
    let d = gamma.curve_distance(p);
    if d > ON_CURVE_TOL {
        return Err(GeometryError::OffInterface {
            x: p[0],
            y: p[1],
            distance: d,
        });
    }
    if let Region::LevelSetStar { .. } | Region::Circle { .. } = gamma {
        let g = gamma.level_set_gradient(p);
        let l = norm(g);
        return Ok([g[0] / l, g[1] / l]);
    }
    let (theta, _) = gamma.locate(p);
    Ok(gamma.normal_at(theta))
}

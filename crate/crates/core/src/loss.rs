//! Composite physics-informed loss.
//!
//! `L = L_Ω1 + L_Ω2 + L_Γ,value + L_Γ,flux + L_∂Ω1 + L_∂Ω2`, each term the mean
//! of squared residuals over its point set:
//!
//! * interior: `−(∇a·∇u + aΔu) − f`
//! * interface: `(u₂ − u₁) − φ` and `a₂∇u₂·n − a₁∇u₁·n − ψ`
//! * boundary: `u − g`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{gradient, Jet, Scalar, Var};
use crate::geometry::{GeometryError, Membership, Point, ON_CURVE_TOL};
use crate::networks::{jet_to_bundle, DualNetwork, JetRow, NetworkError, Order, Side};
use crate::problems::ManufacturedData;
use crate::sampling::CollocationSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("point ({x}, {y}) is not inside {side:?} (classified {found:?})")]
    Domain {
        x: f64,
        y: f64,
        side: Side,
        found: Membership,
    },
    #[error("point ({0}, {1}) is not on the interface")]
    OffInterface(f64, f64),
    #[error("parameter vector has length {got}, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Multipliers of the six loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma_value: f64,
    pub gamma_flux: f64,
    pub boundary1: f64,
    pub boundary2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            omega1: 1.0,
            omega2: 1.0,
            gamma_value: 1.0,
            gamma_flux: 1.0,
            boundary1: 1.0,
            boundary2: 1.0,
        }
    }
}

impl LossWeights {
    fn interior(&self, side: Side) -> f64 {
        match side {
            Side::Side1 => self.omega1,
            Side::Side2 => self.omega2,
        }
    }

    fn boundary(&self, side: Side) -> f64 {
        match side {
            Side::Side1 => self.boundary1,
            Side::Side2 => self.boundary2,
        }
    }
}

/// Weighted loss terms and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_omega1: f64,
    pub l_omega2: f64,
    pub l_gamma_value: f64,
    pub l_gamma_flux: f64,
    pub l_boundary1: f64,
    pub l_boundary2: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn components(&self) -> [f64; 6] {
        [
            self.l_omega1,
            self.l_omega2,
            self.l_gamma_value,
            self.l_gamma_flux,
            self.l_boundary1,
            self.l_boundary2,
        ]
    }

    fn from_components(c: [f64; 6]) -> Self {
        Self {
            l_omega1: c[0],
            l_omega2: c[1],
            l_gamma_value: c[2],
            l_gamma_flux: c[3],
            l_boundary1: c[4],
            l_boundary2: c[5],
            total: c.iter().sum(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite()) && self.total.is_finite()
    }

    pub const CSV_HEADER: &'static str = "l_omega1,l_omega2,l_gamma_value,l_gamma_flux,l_boundary1,l_boundary2,total";
}

/// Problem data frozen at the interior points of one subdomain.
#[derive(Clone, Debug, Default)]
pub struct InteriorData {
    pub points: Vec<Point>,
    a: Vec<f64>,
    grad_a: Vec<[f64; 2]>,
    f: Vec<f64>,
}

impl InteriorData {
    pub fn new(def: &dyn ManufacturedData, side: Side, points: &[Point]) -> Self {
        let mut d = Self {
            points: points.to_vec(),
            ..Default::default()
        };
        for &p in points {
            let (a, ga) = def.coefficient(side, p);
            d.a.push(a);
            d.grad_a.push(ga);
            d.f.push(def.source(side, p));
        }
        d
    }

    /// `−(∇a·∇u + aΔu) − f` from per-point jets.
    pub fn residuals(&self, jets: &[JetRow]) -> Vec<f64> {
        jets.iter()
            .enumerate()
            .map(|(i, j)| {
                let ga = self.grad_a[i];
                -(ga[0] * j[1] + ga[1] * j[2] + self.a[i] * (j[3] + j[4])) - self.f[i]
            })
            .collect()
    }
}

/// Problem data frozen at the interface points.
#[derive(Clone, Debug, Default)]
pub struct InterfaceData {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    a: [Vec<f64>; 2],
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl InterfaceData {
    pub fn new(def: &dyn ManufacturedData, points: &[Point], normals: &[Point]) -> Self {
        let mut d = Self {
            points: points.to_vec(),
            normals: normals.to_vec(),
            ..Default::default()
        };
        for (&p, &n) in points.iter().zip(normals) {
            d.a[0].push(def.coefficient(Side::Side1, p).0);
            d.a[1].push(def.coefficient(Side::Side2, p).0);
            d.phi.push(def.phi(p));
            d.psi.push(def.psi(p, n));
        }
        d
    }

    /// Value and flux jump residuals from one-sided jets.
    pub fn residuals(&self, u1: &[JetRow], u2: &[JetRow]) -> (Vec<f64>, Vec<f64>) {
        let mut value = Vec::with_capacity(u1.len());
        let mut flux = Vec::with_capacity(u1.len());
        for i in 0..u1.len() {
            let n = self.normals[i];
            value.push(u2[i][0] - u1[i][0] - self.phi[i]);
            let f1 = self.a[0][i] * (u1[i][1] * n[0] + u1[i][2] * n[1]);
            let f2 = self.a[1][i] * (u2[i][1] * n[0] + u2[i][2] * n[1]);
            flux.push(f2 - f1 - self.psi[i]);
        }
        (value, flux)
    }
}

/// Dirichlet data frozen at boundary points.
#[derive(Clone, Debug, Default)]
pub struct BoundaryData {
    pub points: Vec<Point>,
    g: Vec<f64>,
}

impl BoundaryData {
    pub fn new(def: &dyn ManufacturedData, side: Side, points: &[Point]) -> Self {
        Self {
            points: points.to_vec(),
            g: points.iter().map(|&p| def.boundary_value(side, p)).collect(),
        }
    }

    pub fn residuals(&self, jets: &[JetRow]) -> Vec<f64> {
        jets.iter().zip(&self.g).map(|(j, g)| j[0] - g).collect()
    }
}

/// All point data needed to evaluate the loss.
#[derive(Clone, Debug)]
pub struct LossData {
    pub interior: [InteriorData; 2],
    pub interface: InterfaceData,
    pub boundary: [BoundaryData; 2],
}

fn idx(side: Side) -> usize {
    match side {
        Side::Side1 => 0,
        Side::Side2 => 1,
    }
}

impl LossData {
    pub fn new(def: &dyn ManufacturedData, colloc: &CollocationSet) -> Self {
        Self {
            interior: [
                InteriorData::new(def, Side::Side1, &colloc.interior1),
                InteriorData::new(def, Side::Side2, &colloc.interior2),
            ],
            interface: InterfaceData::new(def, &colloc.interface, &colloc.normals),
            boundary: [
                BoundaryData::new(def, Side::Side1, &colloc.boundary1),
                BoundaryData::new(def, Side::Side2, &colloc.boundary2),
            ],
        }
    }

    /// Replaces one interior set, e.g. after resampling.
    pub fn set_interior(&mut self, def: &dyn ManufacturedData, side: Side, points: &[Point]) {
        self.interior[idx(side)] = InteriorData::new(def, side, points);
    }
}

/// A pair of fields evaluated with input derivatives.
pub trait FieldPair {
    fn jets(&self, side: Side, pts: &[Point], order: Order) -> Vec<JetRow>;
}

impl FieldPair for DualNetwork {
    fn jets(&self, side: Side, pts: &[Point], order: Order) -> Vec<JetRow> {
        self.net(side).forward_batch(pts, order).0
    }
}

/// The exact solution posing as a network.
pub struct ExactField<'a>(pub &'a dyn ManufacturedData);

impl FieldPair for ExactField<'_> {
    fn jets(&self, side: Side, pts: &[Point], _order: Order) -> Vec<JetRow> {
        pts.iter()
            .map(|&p| {
                let b = self.0.exact(side, p);
                [b.u, b.grad[0], b.grad[1], b.hess[0], b.hess[1], b.hess[2]]
            })
            .collect()
    }
}

fn mean_square(r: &[f64]) -> f64 {
    if r.is_empty() {
        0.0
    } else {
        r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
    }
}

/// Loss of any field pair, without gradients.
pub fn evaluate_loss(field: &dyn FieldPair, data: &LossData, w: &LossWeights) -> LossBreakdown {
    let mut c = [0.0; 6];
    for side in [Side::Side1, Side::Side2] {
        let k = idx(side);
        let int = &data.interior[k];
        c[k] = w.interior(side) * mean_square(&int.residuals(&field.jets(side, &int.points, Order::Laplacian)));
        let b = &data.boundary[k];
        c[4 + k] = w.boundary(side) * mean_square(&b.residuals(&field.jets(side, &b.points, Order::Value)));
    }
    let g = &data.interface;
    let u1 = field.jets(Side::Side1, &g.points, Order::Gradient);
    let u2 = field.jets(Side::Side2, &g.points, Order::Gradient);
    let (rv, rf) = g.residuals(&u1, &u2);
    c[2] = w.gamma_value * mean_square(&rv);
    c[3] = w.gamma_flux * mean_square(&rf);
    LossBreakdown::from_components(c)
}

/// Loss and its gradient with respect to the flat parameters of `dual`.
pub fn loss_and_gradient(dual: &DualNetwork, data: &LossData, w: &LossWeights) -> (LossBreakdown, Vec<f64>) {
    let mut grad = vec![0.0; dual.param_count()];
    let mut c = [0.0; 6];
    let g = &data.interface;
    let ng = g.points.len();
    let (u1g, cache1g) = dual.net1.forward_batch(&g.points, Order::Gradient);
    let (u2g, cache2g) = dual.net2.forward_batch(&g.points, Order::Gradient);
    let (rv, rf) = g.residuals(&u1g, &u2g);
    c[2] = w.gamma_value * mean_square(&rv);
    c[3] = w.gamma_flux * mean_square(&rf);
    let mut seeds_g = [vec![[0.0; 6]; ng], vec![[0.0; 6]; ng]];
    if ng > 0 {
        let sv = 2.0 * w.gamma_value / ng as f64;
        let sf = 2.0 * w.gamma_flux / ng as f64;
        for i in 0..ng {
            let n = g.normals[i];
            let v = sv * rv[i];
            let f = sf * rf[i];
            seeds_g[0][i] = [-v, -f * g.a[0][i] * n[0], -f * g.a[0][i] * n[1], 0.0, 0.0, 0.0];
            seeds_g[1][i] = [v, f * g.a[1][i] * n[0], f * g.a[1][i] * n[1], 0.0, 0.0, 0.0];
        }
    }
    for side in [Side::Side1, Side::Side2] {
        let k = idx(side);
        let net = dual.net(side);
        let range = dual.param_range(side);
        let grad_side = &mut grad[range];

        let int = &data.interior[k];
        let n = int.points.len();
        if n > 0 {
            let (jets, cache) = net.forward_batch(&int.points, Order::Laplacian);
            let r = int.residuals(&jets);
            c[k] = w.interior(side) * mean_square(&r);
            let s = 2.0 * w.interior(side) / n as f64;
            let seeds: Vec<JetRow> = (0..n)
                .map(|i| {
                    let q = s * r[i];
                    let (a, ga) = (int.a[i], int.grad_a[i]);
                    [0.0, -q * ga[0], -q * ga[1], -q * a, -q * a, 0.0]
                })
                .collect();
            net.backward_batch(&cache, &seeds, grad_side);
        }

        let b = &data.boundary[k];
        let n = b.points.len();
        if n > 0 {
            let (jets, cache) = net.forward_batch(&b.points, Order::Value);
            let r = b.residuals(&jets);
            c[4 + k] = w.boundary(side) * mean_square(&r);
            let s = 2.0 * w.boundary(side) / n as f64;
            let seeds: Vec<JetRow> = r.iter().map(|v| [s * v, 0.0, 0.0, 0.0, 0.0, 0.0]).collect();
            net.backward_batch(&cache, &seeds, grad_side);
        }

        if ng > 0 {
            let cache = if k == 0 { &cache1g } else { &cache2g };
            net.backward_batch(cache, &seeds_g[k], grad_side);
        }
    }
    (LossBreakdown::from_components(c), grad)
}

/// Jets of `side`'s network at `p` on the trace, with parameters `theta`.
fn traced_jet<'t>(dual: &DualNetwork, side: Side, theta: &[Jet<Var<'t>>], p: Point, t: &'t crate::diff::Trace) -> Jet<Var<'t>> {
    let range = dual.param_range(side);
    let x = Jet::seed_x(t.constant(p[0]));
    let y = Jet::seed_y(t.constant(p[1]));
    dual.net(side).forward_generic(&theta[range], x, y)
}

fn mean_sq_traced<'t>(terms: Vec<Var<'t>>, weight: f64) -> Option<Var<'t>> {
    let first = *terms.first()?;
    let scale = weight / terms.len() as f64;
    let mut acc = first * first;
    for r in &terms[1..] {
        acc = acc + *r * *r;
    }
    Some(acc * acc.constant(scale))
}

fn normal_derivative<'t>(j: &Jet<Var<'t>>, n: Point) -> Var<'t> {
    j.dx * j.dx.constant(n[0]) + j.dy * j.dy.constant(n[1])
}

/// Reference loss and gradient at `theta`, recorded point by point on a
/// [`crate::diff::Trace`] through `Jet<Var>` network evaluations.
pub fn loss_parameter_gradient(
    dual: &DualNetwork,
    data: &LossData,
    w: &LossWeights,
    theta: &[f64],
) -> Result<(f64, Vec<f64>), LossError> {
    if theta.len() != dual.param_count() {
        return Err(LossError::Shape {
            expected: dual.param_count(),
            got: theta.len(),
        });
    }
    Ok(gradient(theta, |t, vars| {
        let params: Vec<Jet<Var<'_>>> = vars.iter().map(|&v| Jet::lift(v)).collect();
        let mut total = t.constant(0.0);
        for side in [Side::Side1, Side::Side2] {
            let k = idx(side);
            let int = &data.interior[k];
            let res: Vec<Var<'_>> = int
                .points
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let j = traced_jet(dual, side, &params, p, t);
                    let ga = int.grad_a[i];
                    let op = j.dx * t.constant(ga[0]) + j.dy * t.constant(ga[1]) + (j.dxx + j.dyy) * t.constant(int.a[i]);
                    -op - t.constant(int.f[i])
                })
                .collect();
            if let Some(v) = mean_sq_traced(res, w.interior(side)) {
                total = total + v;
            }
            let b = &data.boundary[k];
            let res: Vec<Var<'_>> = b
                .points
                .iter()
                .enumerate()
                .map(|(i, &p)| traced_jet(dual, side, &params, p, t).v - t.constant(b.g[i]))
                .collect();
            if let Some(v) = mean_sq_traced(res, w.boundary(side)) {
                total = total + v;
            }
        }
        let g = &data.interface;
        let mut rv = Vec::new();
        let mut rf = Vec::new();
        for (i, &p) in g.points.iter().enumerate() {
            let n = g.normals[i];
            let u1 = traced_jet(dual, Side::Side1, &params, p, t);
            let u2 = traced_jet(dual, Side::Side2, &params, p, t);
            rv.push(u2.v - u1.v - t.constant(g.phi[i]));
            let flux = normal_derivative(&u2, n) * t.constant(g.a[1][i]) - normal_derivative(&u1, n) * t.constant(g.a[0][i]) - t.constant(g.psi[i]);
            rf.push(flux);
        }
        if let Some(v) = mean_sq_traced(rv, w.gamma_value) {
            total = total + v;
        }
        if let Some(v) = mean_sq_traced(rf, w.gamma_flux) {
            total = total + v;
        }
        total
    }))
}

/// Interior PDE residual of `field` at a point strictly inside `side`.
pub fn interior_residual(field: &dyn FieldPair, def: &dyn ManufacturedData, p: Point, side: Side) -> Result<f64, LossError> {
    let found = def.decomposition().contains(p)?;
    let want = match side {
        Side::Side1 => Membership::Inside1,
        Side::Side2 => Membership::Inside2,
    };
    if found != want {
        return Err(LossError::Domain {
            x: p[0],
            y: p[1],
            side,
            found,
        });
    }
    let d = InteriorData::new(def, side, &[p]);
    Ok(d.residuals(&field.jets(side, &[p], Order::Laplacian))[0])
}

/// `(value, flux)` jump residuals of `field` at an interface point.
pub fn jump_residuals(field: &dyn FieldPair, def: &dyn ManufacturedData, p: Point, n: Point) -> Result<(f64, f64), LossError> {
    crate::geometry::check_point(p)?;
    if def.decomposition().gamma.curve_distance(p) > ON_CURVE_TOL {
        return Err(LossError::OffInterface(p[0], p[1]));
    }
    let d = InterfaceData::new(def, &[p], &[n]);
    let u1 = field.jets(Side::Side1, &[p], Order::Gradient);
    let u2 = field.jets(Side::Side2, &[p], Order::Gradient);
    let (v, f) = d.residuals(&u1, &u2);
    Ok((v[0], f[0]))
}

/// Value, gradient and Hessian of one side's network at `p`.
pub fn bundle(dual: &DualNetwork, side: Side, p: Point) -> crate::diff::EvalBundle {
    let j = dual.net(side).forward_batch(&[p], Order::Hessian).0;
    jet_to_bundle(&j[0])
}

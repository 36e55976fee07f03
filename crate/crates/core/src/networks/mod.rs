//! Network backbones and the two-subdomain wrapper.
//!
//! Every backbone offers two evaluation paths:
//!
//! * `forward_generic` runs on any [`Scalar`]; instantiated on `Jet<Var>` it is
//!   the reference for input and parameter derivatives.
//! * `forward_batch` / `backward_batch` propagate second-order input jets for a
//!   whole point batch and pull per-point jet adjoints back onto the
//!   parameters. Training uses this path.

pub mod kan;
pub mod mlp;
pub mod spline;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{EvalBundle, Scalar};
use crate::geometry::{DomainDecomposition, GeometryError, Membership, Point};

pub use kan::{kan_param_count, KanCache, KanNetwork};
pub use mlp::{mlp_param_count, Activation, MlpCache, MlpNetwork};
pub use spline::{basis_derivative, spline_basis, SplineGrid};

/// Per-point jet `[u, u_x, u_y, u_xx, u_yy, u_xy]`.
pub type JetRow = [f64; 6];

/// How many jet channels a batched pass propagates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// `u`
    Value,
    /// `u, u_x, u_y`
    Gradient,
    /// `u, u_x, u_y, u_xx, u_yy`
    Laplacian,
    /// all six channels
    Hessian,
}

impl Order {
    pub fn channels(self) -> usize {
        match self {
            Order::Value => 1,
            Order::Gradient => 3,
            Order::Laplacian => 5,
            Order::Hessian => 6,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("parameter vector has length {got}, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("point ({0}, {1}) lies on the interface; choose a side explicitly")]
    AmbiguousSide(f64, f64),
    #[error("point ({0}, {1}) lies outside the computational domain")]
    OutsideDomain(f64, f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub(crate) fn check_widths(widths: &[usize]) -> Result<(), NetworkError> {
    if widths.len() < 2 {
        return Err(NetworkError::Invalid("at least two widths are required".into()));
    }
    if widths[0] != 2 || widths[widths.len() - 1] != 1 {
        return Err(NetworkError::Invalid(format!(
            "widths must start with 2 inputs and end with 1 output, got {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(NetworkError::Invalid("layer widths must be positive".into()));
    }
    Ok(())
}

/// A single-subdomain network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backbone {
    Mlp(MlpNetwork),
    Kan(KanNetwork),
}

/// Cache of a batched forward pass, consumed by [`Backbone::backward_batch`].
#[derive(Debug)]
pub enum BackboneCache {
    Mlp(MlpCache),
    Kan(KanCache),
}

impl Backbone {
    pub fn kind(&self) -> &'static str {
        match self {
            Backbone::Mlp(_) => "mlp",
            Backbone::Kan(_) => "kan",
        }
    }

    pub fn widths(&self) -> &[usize] {
        match self {
            Backbone::Mlp(n) => n.widths(),
            Backbone::Kan(n) => n.widths(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Backbone::Mlp(n) => n.params(),
            Backbone::Kan(n) => n.params(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), NetworkError> {
        match self {
            Backbone::Mlp(n) => n.set_params(p),
            Backbone::Kan(n) => n.set_params(p),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    pub fn forward(&self, p: Point) -> f64 {
        match self {
            Backbone::Mlp(n) => n.forward(p),
            Backbone::Kan(n) => n.forward(p),
        }
    }

    pub fn forward_generic<S: Scalar>(&self, params: &[S], x: S, y: S) -> S {
        match self {
            Backbone::Mlp(n) => n.forward_generic(params, x, y),
            Backbone::Kan(n) => n.forward_generic(params, x, y),
        }
    }

    pub fn forward_batch(&self, pts: &[Point], order: Order) -> (Vec<JetRow>, BackboneCache) {
        match self {
            Backbone::Mlp(n) => {
                let (j, c) = n.forward_batch(pts, order);
                (j, BackboneCache::Mlp(c))
            }
            Backbone::Kan(n) => {
                let (j, c) = n.forward_batch(pts, order);
                (j, BackboneCache::Kan(c))
            }
        }
    }

    /// Adds `Σ_p seeds[p] · ∂jet_p/∂θ` to `grad`.
    ///
    /// # Panics
    /// If `cache` came from a different backbone kind.
    pub fn backward_batch(&self, cache: &BackboneCache, seeds: &[JetRow], grad: &mut [f64]) {
        match (self, cache) {
            (Backbone::Mlp(n), BackboneCache::Mlp(c)) => n.backward_batch(c, seeds, grad),
            (Backbone::Kan(n), BackboneCache::Kan(c)) => n.backward_batch(c, seeds, grad),
            _ => panic!("backbone and cache kinds differ"),
        }
    }

    /// Plain values at many points.
    pub fn values(&self, pts: &[Point]) -> Vec<f64> {
        self.forward_batch(pts, Order::Value).0.iter().map(|j| j[0]).collect()
    }

    /// Value, gradient and Hessian at `p`.
    pub fn bundle(&self, p: Point) -> EvalBundle {
        let (j, _) = self.forward_batch(&[p], Order::Hessian);
        jet_to_bundle(&j[0])
    }
}

pub fn jet_to_bundle(j: &JetRow) -> EvalBundle {
    EvalBundle {
        u: j[0],
        grad: [j[1], j[2]],
        hess: [j[3], j[4], j[5]],
    }
}

/// Which subdomain network evaluates a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Side1,
    Side2,
}

/// Routing rule for [`DualNetwork::dual_eval`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideSelect {
    Auto,
    Side1,
    Side2,
}

/// Independent networks for Ω₁ and Ω₂. Flat parameters are `net1` then `net2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualNetwork {
    pub net1: Backbone,
    pub net2: Backbone,
}

impl DualNetwork {
    pub fn new(net1: Backbone, net2: Backbone) -> Result<Self, NetworkError> {
        if net1.kind() != net2.kind() {
            return Err(NetworkError::Invalid("both subdomain networks must use the same backbone".into()));
        }
        Ok(Self { net1, net2 })
    }

    pub fn net(&self, side: Side) -> &Backbone {
        match side {
            Side::Side1 => &self.net1,
            Side::Side2 => &self.net2,
        }
    }

    pub fn param_count(&self) -> usize {
        self.net1.param_count() + self.net2.param_count()
    }

    /// Range of `side`'s parameters inside the flat vector.
    pub fn param_range(&self, side: Side) -> std::ops::Range<usize> {
        let n1 = self.net1.param_count();
        match side {
            Side::Side1 => 0..n1,
            Side::Side2 => n1..n1 + self.net2.param_count(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.net1.params().to_vec();
        p.extend_from_slice(self.net2.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), NetworkError> {
        if p.len() != self.param_count() {
            return Err(NetworkError::Shape {
                expected: self.param_count(),
                got: p.len(),
            });
        }
        let n1 = self.net1.param_count();
        self.net1.set_params(&p[..n1])?;
        self.net2.set_params(&p[n1..])
    }

    /// Evaluates the network owning `p`, or the forced side.
    pub fn dual_eval(
        &self,
        decomp: &DomainDecomposition,
        p: Point,
        side: SideSelect,
    ) -> Result<f64, NetworkError> {
        let side = match side {
            SideSelect::Side1 => Side::Side1,
            SideSelect::Side2 => Side::Side2,
            SideSelect::Auto => match decomp.contains(p)? {
                Membership::Inside1 => Side::Side1,
                Membership::Inside2 => Side::Side2,
                Membership::OnGamma => return Err(NetworkError::AmbiguousSide(p[0], p[1])),
                Membership::Outside => return Err(NetworkError::OutsideDomain(p[0], p[1])),
            },
        };
        crate::geometry::check_point(p)?;
        Ok(self.net(side).forward(p))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, NetworkError> {
        let net: Self = serde_json::from_str(s).map_err(|e| NetworkError::Invalid(e.to_string()))?;
        Self::new(net.net1, net.net2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e1_decomp() -> DomainDecomposition {
        DomainDecomposition::new(
            Region::AxisAlignedBox {
                min: [-1.0, -1.0],
                max: [1.0, 1.0],
            },
            Region::Circle {
                center: [0.0, 0.0],
                radius: 0.5,
            },
            vec![],
        )
        .unwrap()
    }

    fn kan_pair(seed: u64) -> DualNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = [[-1.0, -1.0], [1.0, 1.0]];
        let n1 = KanNetwork::random(&[2, 3, 3, 1], 5, 3, b, &mut rng).unwrap();
        let n2 = KanNetwork::random(&[2, 3, 3, 1], 5, 3, b, &mut rng).unwrap();
        DualNetwork::new(Backbone::Kan(n1), Backbone::Kan(n2)).unwrap()
    }

    #[test]
    fn routing_by_membership() {
        let d = e1_decomp();
        let dual = kan_pair(1);
        let v = dual.dual_eval(&d, [0.0, 0.0], SideSelect::Auto).unwrap();
        assert_eq!(v, dual.net1.forward([0.0, 0.0]));
        let v = dual.dual_eval(&d, [0.9, 0.9], SideSelect::Auto).unwrap();
        assert_eq!(v, dual.net2.forward([0.9, 0.9]));
    }

    #[test]
    fn interface_point_requires_explicit_side() {
        let d = e1_decomp();
        let dual = kan_pair(2);
        assert_eq!(
            dual.dual_eval(&d, [0.5, 0.0], SideSelect::Auto),
            Err(NetworkError::AmbiguousSide(0.5, 0.0))
        );
        let u1 = dual.dual_eval(&d, [0.5, 0.0], SideSelect::Side1).unwrap();
        let u2 = dual.dual_eval(&d, [0.5, 0.0], SideSelect::Side2).unwrap();
        assert_ne!(u1, u2);
    }

    #[test]
    fn mixed_backbones_rejected() {
        let mlp = MlpNetwork::zeros(&[2, 3, 1]).unwrap();
        let kan = KanNetwork::new(&[2, 1], 3, 3, [[-1.0, -1.0], [1.0, 1.0]]).unwrap();
        assert!(DualNetwork::new(Backbone::Mlp(mlp), Backbone::Kan(kan)).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dual = kan_pair(3);
        let back = DualNetwork::from_json(&dual.to_json()).unwrap();
        assert_eq!(back, dual);
        let bits = |d: &DualNetwork| d.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&dual));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m1 = MlpNetwork::glorot(&[2, 4, 1], &mut rng).unwrap();
        let m2 = MlpNetwork::glorot(&[2, 4, 1], &mut rng).unwrap();
        let dual = DualNetwork::new(Backbone::Mlp(m1), Backbone::Mlp(m2)).unwrap();
        assert_eq!(DualNetwork::from_json(&dual.to_json()).unwrap(), dual);
    }

    #[test]
    fn unknown_checkpoint_keys_rejected() {
        let dual = kan_pair(5);
        let mut v: serde_json::Value = serde_json::from_str(&dual.to_json()).unwrap();
        v["net1"]["extra"] = serde_json::json!(1);
        assert!(DualNetwork::from_json(&v.to_string()).is_err());
    }
}

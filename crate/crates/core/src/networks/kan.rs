use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spline::{LocalBasis, SplineGrid, MAX_DEGREE};
use super::{JetRow, NetworkError, Order};
use crate::diff::Scalar;
use crate::geometry::Point;

/// Kolmogorov–Arnold network. Edge `(k, i, j)` maps input node `j` of layer `k`
/// to output node `i` through `c_r·SiLU(x) + c_B·Σ c_l B_l(x)`.
///
/// Flat parameter order: for each layer, for each output `i`, for each input
/// `j`: `[c_r, c_B, c_1, …, c_{G+m}]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KanRepr", into = "KanRepr")]
pub struct KanNetwork {
    widths: Vec<usize>,
    intervals: usize,
    degree: usize,
    /// Grid range per layer, per input node.
    ranges: Vec<Vec<[f64; 2]>>,
    params: Vec<f64>,
    grids: Vec<Vec<SplineGrid>>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KanRepr {
    widths: Vec<usize>,
    grid_intervals: usize,
    spline_order: usize,
    grid_ranges: Vec<Vec<[f64; 2]>>,
    params: Vec<f64>,
}

impl TryFrom<KanRepr> for KanNetwork {
    type Error = NetworkError;
    fn try_from(r: KanRepr) -> Result<Self, NetworkError> {
        let mut net = KanNetwork::with_ranges(&r.widths, r.grid_intervals, r.spline_order, r.grid_ranges)?;
        net.set_params(&r.params)?;
        Ok(net)
    }
}

impl From<KanNetwork> for KanRepr {
    fn from(n: KanNetwork) -> Self {
        Self {
            widths: n.widths,
            grid_intervals: n.intervals,
            spline_order: n.degree,
            grid_ranges: n.ranges,
            params: n.params,
        }
    }
}

pub fn kan_param_count(widths: &[usize], intervals: usize, degree: usize) -> usize {
    widths.windows(2).map(|w| w[0] * w[1]).sum::<usize>() * (intervals + degree + 2)
}

/// Range of the hidden-layer grids.
pub const HIDDEN_RANGE: [f64; 2] = [-1.0, 1.0];

impl KanNetwork {
    /// Network with `c_r = c_B = 1/n_in` (fan-in of the edge's layer) and zero
    /// spline coefficients, so each node starts as a mean of its inputs'
    /// SiLU values and stays inside the hidden grid range. The first
    /// layer's grids span `input_box` (`[min, max]` corners); later layers use
    /// [`HIDDEN_RANGE`].
    pub fn new(
        widths: &[usize],
        intervals: usize,
        degree: usize,
        input_box: [Point; 2],
    ) -> Result<Self, NetworkError> {
        super::check_widths(widths)?;
        let ranges = (0..widths.len() - 1)
            .map(|k| {
                if k == 0 {
                    vec![
                        [input_box[0][0], input_box[1][0]],
                        [input_box[0][1], input_box[1][1]],
                    ]
                } else {
                    vec![HIDDEN_RANGE; widths[k]]
                }
            })
            .collect();
        let mut net = Self::with_ranges(widths, intervals, degree, ranges)?;
        let stride = net.edge_len();
        for k in 0..net.layers() {
            let scale = 1.0 / widths[k] as f64;
            let (start, end) = (net.offsets[k], net.offsets[k] + widths[k] * widths[k + 1] * stride);
            for e in net.params[start..end].chunks_exact_mut(stride) {
                e[0] = scale;
                e[1] = scale;
            }
        }
        Ok(net)
    }

    /// [`KanNetwork::new`] followed by `c_l ~ N(0, 0.1/√n_in)`.
    pub fn random<R: Rng>(
        widths: &[usize],
        intervals: usize,
        degree: usize,
        input_box: [Point; 2],
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        let mut net = Self::new(widths, intervals, degree, input_box)?;
        let stride = net.edge_len();
        for k in 0..net.layers() {
            let normal = Normal::new(0.0, 0.1 / (widths[k] as f64).sqrt()).unwrap();
            let (start, end) = (net.offsets[k], net.offsets[k] + widths[k] * widths[k + 1] * stride);
            for e in net.params[start..end].chunks_exact_mut(stride) {
                for c in &mut e[2..] {
                    *c = normal.sample(rng);
                }
            }
        }
        Ok(net)
    }

    fn with_ranges(
        widths: &[usize],
        intervals: usize,
        degree: usize,
        ranges: Vec<Vec<[f64; 2]>>,
    ) -> Result<Self, NetworkError> {
        super::check_widths(widths)?;
        if intervals < 1 {
            return Err(NetworkError::Invalid("grid intervals G must be at least 1".into()));
        }
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(NetworkError::Invalid(format!(
                "spline order must be in 1..={MAX_DEGREE}, got {degree}"
            )));
        }
        if ranges.len() != widths.len() - 1 || ranges.iter().zip(widths).any(|(r, &w)| r.len() != w) {
            return Err(NetworkError::Invalid("grid ranges do not match widths".into()));
        }
        let mut grids = Vec::with_capacity(ranges.len());
        for layer in &ranges {
            let mut g = Vec::with_capacity(layer.len());
            for &[lo, hi] in layer {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(NetworkError::Invalid(format!("invalid grid range [{lo}, {hi}]")));
                }
                g.push(SplineGrid::new(lo, hi, intervals, degree));
            }
            grids.push(g);
        }
        let stride = intervals + degree + 2;
        let mut offsets = Vec::with_capacity(ranges.len());
        let mut off = 0;
        for w in widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] * stride;
        }
        Ok(Self {
            widths: widths.to_vec(),
            intervals,
            degree,
            ranges,
            params: vec![0.0; off],
            grids,
            offsets,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn grid_intervals(&self) -> usize {
        self.intervals
    }

    pub fn spline_order(&self) -> usize {
        self.degree
    }

    pub fn grid(&self, layer: usize, input: usize) -> &SplineGrid {
        &self.grids[layer][input]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), NetworkError> {
        if p.len() != self.params.len() {
            return Err(NetworkError::Shape {
                expected: self.params.len(),
                got: p.len(),
            });
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameters per edge, `G + m + 2`.
    pub fn edge_len(&self) -> usize {
        self.intervals + self.degree + 2
    }

    /// Offset of edge `(layer, out, inp)` in the flat parameter vector.
    pub fn edge_offset(&self, layer: usize, out: usize, inp: usize) -> usize {
        self.offsets[layer] + (out * self.widths[layer] + inp) * self.edge_len()
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn forward_generic<S: Scalar>(&self, params: &[S], x: S, y: S) -> S {
        let basis = self.intervals + self.degree;
        let mut h = vec![x, y];
        for k in 0..self.layers() {
            let zero = h[0].constant(0.0);
            let mut out = vec![zero; self.widths[k + 1]];
            for (j, hj) in h.iter().enumerate() {
                let r = hj.silu();
                let grid = &self.grids[k][j];
                for (i, acc) in out.iter_mut().enumerate() {
                    let off = self.edge_offset(k, i, j);
                    let spline = hj.spline(grid, &params[off + 2..off + 2 + basis], 0);
                    let edge = params[off].clone() * r.clone() + params[off + 1].clone() * spline;
                    *acc = acc.clone() + edge;
                }
            }
            h = out;
        }
        h.pop().unwrap()
    }

    pub fn forward(&self, p: Point) -> f64 {
        self.forward_generic(&self.params, p[0], p[1])
    }

    /// Node values of every layer at `p`, input layer first.
    pub fn node_values(&self, p: Point) -> Vec<Vec<f64>> {
        let basis = self.intervals + self.degree;
        let mut all = vec![vec![p[0], p[1]]];
        for k in 0..self.layers() {
            let h = &all[k];
            let mut out = vec![0.0; self.widths[k + 1]];
            for (j, &hj) in h.iter().enumerate() {
                let r = hj.silu();
                let grid = &self.grids[k][j];
                for (i, acc) in out.iter_mut().enumerate() {
                    let off = self.edge_offset(k, i, j);
                    let c = &self.params[off..off + 2 + basis];
                    *acc += c[0] * r + c[1] * grid.eval(&c[2..], hj, 0);
                }
            }
            all.push(out);
        }
        all
    }

    /// Replaces the grid of hidden input `j` of layer `layer` (≥ 1) by
    /// `[lo, hi]`, keeping the spline coefficients.
    pub fn set_grid_range(&mut self, layer: usize, input: usize, lo: f64, hi: f64) -> Result<(), NetworkError> {
        if layer >= self.layers() || input >= self.widths[layer] {
            return Err(NetworkError::Invalid(format!("no grid at layer {layer}, input {input}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(NetworkError::Invalid(format!("invalid grid range [{lo}, {hi}]")));
        }
        self.ranges[layer][input] = [lo, hi];
        self.grids[layer][input] = SplineGrid::new(lo, hi, self.intervals, self.degree);
        Ok(())
    }

    pub fn forward_batch(&self, pts: &[Point], order: Order) -> (Vec<JetRow>, KanCache) {
        match order {
            Order::Value => self.forward_impl::<1>(pts),
            Order::Gradient => self.forward_impl::<3>(pts),
            Order::Laplacian => self.forward_impl::<5>(pts),
            Order::Hessian => self.forward_impl::<6>(pts),
        }
    }

    pub fn backward_batch(&self, cache: &KanCache, seeds: &[JetRow], grad: &mut [f64]) {
        match cache.nch {
            1 => self.backward_impl::<1>(cache, seeds, grad),
            3 => self.backward_impl::<3>(cache, seeds, grad),
            5 => self.backward_impl::<5>(cache, seeds, grad),
            _ => self.backward_impl::<6>(cache, seeds, grad),
        }
    }

    fn forward_impl<const NCH: usize>(&self, pts: &[Point]) -> (Vec<JetRow>, KanCache) {
        let n = pts.len();
        // Backward needs one derivative beyond those used in the forward jets.
        let max_deriv = match NCH {
            1 => 1,
            3 => 2,
            _ => 3,
        };
        let mut x: Vec<JetRow> = Vec::with_capacity(2 * n);
        for axis in 0..2 {
            for p in pts {
                let mut jet = [0.0; 6];
                jet[0] = p[axis];
                if NCH >= 3 {
                    jet[1 + axis] = 1.0;
                }
                x.push(jet);
            }
        }
        let el = self.edge_len();
        let mut layers = Vec::with_capacity(self.layers());
        for k in 0..self.layers() {
            let (n_in, n_out) = (self.widths[k], self.widths[k + 1]);
            let mut out = vec![[0.0; 6]; n_out * n];
            let mut edges = Vec::with_capacity(n_in * n);
            let mut splines = Vec::with_capacity(n_in * n_out * n);
            for j in 0..n_in {
                let grid = &self.grids[k][j];
                for p in 0..n {
                    let xi = x[j * n + p];
                    let e = EdgeInput::new(silu_derivs(xi[0]), grid.local_upto(xi[0], max_deriv));
                    for i in 0..n_out {
                        let off = self.offsets[k] + (i * n_in + j) * el;
                        let edge = &self.params[off..off + el];
                        let (cr, cb) = (edge[0], edge[1]);
                        let s = e.spline::<NCH>(&edge[2..]);
                        splines.push(s);
                        let o = &mut out[i * n + p];
                        o[0] += cr * e.r[0] + cb * s[0];
                        if NCH >= 3 {
                            let g1 = cr * e.r[1] + cb * s[1];
                            o[1] += g1 * xi[1];
                            o[2] += g1 * xi[2];
                            if NCH >= 5 {
                                let g2 = cr * e.r[2] + cb * s[2];
                                o[3] += g2 * xi[1] * xi[1] + g1 * xi[3];
                                o[4] += g2 * xi[2] * xi[2] + g1 * xi[4];
                                if NCH == 6 {
                                    o[5] += g2 * xi[1] * xi[2] + g1 * xi[5];
                                }
                            }
                        }
                    }
                    edges.push(e);
                }
            }
            layers.push(KanLayerCache { inputs: x, edges, splines });
            x = out;
        }
        (
            x,
            KanCache {
                n_points: n,
                nch: NCH,
                layers,
            },
        )
    }

    fn backward_impl<const NCH: usize>(&self, cache: &KanCache, seeds: &[JetRow], grad: &mut [f64]) {
        let n = cache.n_points;
        let el = self.edge_len();
        let mut adj: Vec<JetRow> = seeds.to_vec();
        for k in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.widths[k], self.widths[k + 1]);
            let lc = &cache.layers[k];
            let mut adj_in = if k > 0 { vec![[0.0; 6]; n_in * n] } else { Vec::new() };
            for j in 0..n_in {
                for p in 0..n {
                    let xi = &lc.inputs[j * n + p];
                    let e = &lc.edges[j * n + p];
                    let mut a_in = [0.0; 6];
                    for i in 0..n_out {
                        let a = &adj[i * n + p];
                        let off = self.offsets[k] + (i * n_in + j) * el;
                        let (cr, cb) = (self.params[off], self.params[off + 1]);
                        let s = lc.splines[(j * n + p) * n_out + i];
                        let (mut q1, mut q2) = (0.0, 0.0);
                        if NCH >= 3 {
                            q1 = a[1] * xi[1] + a[2] * xi[2];
                        }
                        if NCH >= 5 {
                            q1 += a[3] * xi[3] + a[4] * xi[4];
                            q2 = a[3] * xi[1] * xi[1] + a[4] * xi[2] * xi[2];
                        }
                        if NCH == 6 {
                            q1 += a[5] * xi[5];
                            q2 += a[5] * xi[1] * xi[2];
                        }
                        let edge_grad = &mut grad[off..off + el];
                        edge_grad[0] += a[0] * e.r[0] + q1 * e.r[1] + q2 * e.r[2];
                        edge_grad[1] += a[0] * s[0] + q1 * s[1] + q2 * s[2];
                        let cg = &mut edge_grad[2 + e.start..2 + e.start + e.count];
                        for (t, g) in cg.iter_mut().enumerate() {
                            let mut v = a[0] * e.values[0][t];
                            if NCH >= 3 {
                                v += q1 * e.values[1][t];
                            }
                            if NCH >= 5 {
                                v += q2 * e.values[2][t];
                            }
                            *g += cb * v;
                        }
                        if k > 0 {
                            let g1 = cr * e.r[1] + cb * s[1];
                            a_in[0] += a[0] * g1;
                            if NCH >= 3 {
                                let g2 = cr * e.r[2] + cb * s[2];
                                a_in[0] += q1 * g2;
                                a_in[1] += a[1] * g1;
                                a_in[2] += a[2] * g1;
                                if NCH >= 5 {
                                    let g3 = cr * e.r[3] + cb * s[3];
                                    a_in[0] += q2 * g3;
                                    a_in[1] += 2.0 * a[3] * g2 * xi[1];
                                    a_in[2] += 2.0 * a[4] * g2 * xi[2];
                                    a_in[3] += a[3] * g1;
                                    a_in[4] += a[4] * g1;
                                    if NCH == 6 {
                                        a_in[1] += a[5] * g2 * xi[2];
                                        a_in[2] += a[5] * g2 * xi[1];
                                        a_in[5] += a[5] * g1;
                                    }
                                }
                            }
                        }
                    }
                    if k > 0 {
                        adj_in[j * n + p] = a_in;
                    }
                }
            }
            adj = adj_in;
        }
    }
}

/// Cached per-layer inputs and edge evaluations of a batched KAN pass.
#[derive(Debug)]
pub struct KanCache {
    n_points: usize,
    nch: usize,
    layers: Vec<KanLayerCache>,
}

#[derive(Debug)]
struct KanLayerCache {
    /// Input jets, indexed `node * n_points + point`.
    inputs: Vec<JetRow>,
    edges: Vec<EdgeInput>,
    /// Spline value and derivatives, indexed `(node * n_points + point) * n_out + out`.
    splines: Vec<[f64; 4]>,
}

/// SiLU and the active basis functions at one node input.
#[derive(Debug)]
struct EdgeInput {
    /// SiLU and its first three derivatives.
    r: [f64; 4],
    /// First active coefficient and number of active coefficients.
    start: usize,
    count: usize,
    /// `values[d][t]`: `d`-th derivative of coefficient `start + t`'s basis function.
    values: [[f64; MAX_DEGREE + 1]; 4],
}

impl EdgeInput {
    fn new(r: [f64; 4], basis: Option<LocalBasis>) -> Self {
        let mut e = EdgeInput {
            r,
            start: 0,
            count: 0,
            values: [[0.0; MAX_DEGREE + 1]; 4],
        };
        if let Some(b) = basis {
            let valid = b.valid();
            e.start = (b.first + valid.start as isize) as usize;
            e.count = valid.len();
            for d in 0..4 {
                e.values[d][..valid.len()].copy_from_slice(&b.values[d][valid.clone()]);
            }
        }
        e
    }

    /// Spline value and the derivatives a pass with `NCH` channels needs.
    #[inline(always)]
    fn spline<const NCH: usize>(&self, coeffs: &[f64]) -> [f64; 4] {
        let mut s = [0.0; 4];
        let c = &coeffs[self.start..self.start + self.count];
        for (t, &ct) in c.iter().enumerate() {
            s[0] += ct * self.values[0][t];
            s[1] += ct * self.values[1][t];
            if NCH >= 3 {
                s[2] += ct * self.values[2][t];
            }
            if NCH >= 5 {
                s[3] += ct * self.values[3][t];
            }
        }
        s
    }
}

/// `SiLU(v)` and its first three derivatives.
pub fn silu_derivs(v: f64) -> [f64; 4] {
    let s = 1.0 / (1.0 + (-v).exp());
    let s1 = s * (1.0 - s);
    let s2 = s1 * (1.0 - 2.0 * s);
    let s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
    [v * s, s + v * s1, 2.0 * s1 + v * s2, 3.0 * s2 + v * s3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const UNIT: [Point; 2] = [[-1.0, -1.0], [1.0, 1.0]];

    #[test]
    fn parameter_count_of_paper_kan() {
        assert_eq!(kan_param_count(&[2, 3, 3, 3, 1], 10, 3), 405);
        let net = KanNetwork::new(&[2, 3, 3, 3, 1], 10, 3, UNIT).unwrap();
        assert_eq!(net.param_count(), 405);
    }

    #[test]
    fn initial_hidden_values_stay_in_grid_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = KanNetwork::random(&[2, 5, 5, 5, 1], 5, 3, UNIT, &mut rng).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let p = [-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64];
                for layer in &net.node_values(p)[1..4] {
                    assert!(layer.iter().all(|v| v.abs() < 1.0), "{p:?}: {layer:?}");
                }
            }
        }
    }

    #[test]
    fn zero_intervals_rejected() {
        assert!(matches!(
            KanNetwork::new(&[2, 1], 0, 3, UNIT),
            Err(NetworkError::Invalid(_))
        ));
    }

    #[test]
    fn residual_path_only_is_silu_sum() {
        let mut net = KanNetwork::new(&[2, 1], 5, 3, UNIT).unwrap();
        let mut p = net.params().to_vec();
        for e in p.chunks_exact_mut(net.edge_len()) {
            e[1] = 0.0;
        }
        net.set_params(&p).unwrap();
        let silu = |v: f64| v / (1.0 + (-v).exp());
        let got = net.forward([0.3, -0.4]);
        assert!((got - 0.5 * (silu(0.3) + silu(-0.4))).abs() < 1e-15);
    }

    #[test]
    fn silu_derivatives_match_fd() {
        let h = 1e-5;
        for &v in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let d = silu_derivs(v);
            for q in 0..3 {
                let fd = (silu_derivs(v + h)[q] - silu_derivs(v - h)[q]) / (2.0 * h);
                assert!((fd - d[q + 1]).abs() < 1e-8, "v={v} q={q}");
            }
        }
    }

    #[test]
    fn batched_forward_matches_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = KanNetwork::random(&[2, 3, 2, 1], 6, 3, UNIT, &mut rng).unwrap();
        let pts = [[0.1, 0.2], [-0.8, 0.55], [0.97, -0.3]];
        for order in [Order::Value, Order::Gradient, Order::Laplacian, Order::Hessian] {
            let (jets, _) = net.forward_batch(&pts, order);
            for (p, jet) in pts.iter().zip(&jets) {
                let b = crate::diff::evaluate_with_input_derivatives(
                    |x, y| {
                        let params: Vec<_> = net.params().iter().map(|&v| crate::diff::Jet::lift(v)).collect();
                        net.forward_generic(&params, x, y)
                    },
                    *p,
                );
                let want = [b.u, b.grad[0], b.grad[1], b.hess[0], b.hess[1], b.hess[2]];
                for c in 0..order.channels() {
                    assert!((jet[c] - want[c]).abs() < 1e-13, "{order:?} channel {c}");
                }
            }
        }
    }
}

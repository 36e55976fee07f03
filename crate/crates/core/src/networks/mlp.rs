use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{JetRow, NetworkError, Order};
use crate::diff::Scalar;
use crate::geometry::Point;

/// Hidden-layer nonlinearity of an [`MlpNetwork`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Fully connected network `N^k = W^k σ(N^{k−1}) + b^k` with an identity output layer.
///
/// Parameters are stored flat, layer by layer: `W^k` in row-major order
/// (`n_{k+1}` rows, `n_k` columns) followed by `b^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr", into = "MlpRepr")]
pub struct MlpNetwork {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpRepr {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

impl TryFrom<MlpRepr> for MlpNetwork {
    type Error = NetworkError;
    fn try_from(r: MlpRepr) -> Result<Self, NetworkError> {
        let mut net = MlpNetwork::zeros(&r.widths)?;
        net.activation = r.activation;
        net.set_params(&r.params)?;
        Ok(net)
    }
}

impl From<MlpNetwork> for MlpRepr {
    fn from(n: MlpNetwork) -> Self {
        Self {
            widths: n.widths,
            activation: n.activation,
            params: n.params,
        }
    }
}

pub fn mlp_param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpNetwork {
    /// All-zero network with the given widths.
    pub fn zeros(widths: &[usize]) -> Result<Self, NetworkError> {
        super::check_widths(widths)?;
        let mut offsets = Vec::with_capacity(widths.len());
        let mut off = 0;
        for w in widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation: Activation::Tanh,
            params: vec![0.0; off],
            offsets,
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot<R: Rng>(widths: &[usize], rng: &mut R) -> Result<Self, NetworkError> {
        let mut net = Self::zeros(widths)?;
        for k in 0..widths.len() - 1 {
            let (n_in, n_out) = (widths[k], widths[k + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            let off = net.offsets[k];
            for w in &mut net.params[off..off + n_in * n_out] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
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

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn weight(&self, k: usize) -> ArrayView2<'_, f64> {
        let (n_in, n_out) = (self.widths[k], self.widths[k + 1]);
        let off = self.offsets[k];
        ArrayView2::from_shape((n_out, n_in), &self.params[off..off + n_in * n_out]).unwrap()
    }

    fn bias(&self, k: usize) -> &[f64] {
        let (n_in, n_out) = (self.widths[k], self.widths[k + 1]);
        let off = self.offsets[k] + n_in * n_out;
        &self.params[off..off + n_out]
    }

    /// Forward pass on any [`Scalar`], reading parameters from `params`.
    pub fn forward_generic<S: Scalar>(&self, params: &[S], x: S, y: S) -> S {
        let mut h = vec![x, y];
        for k in 0..self.layers() {
            let (n_in, n_out) = (self.widths[k], self.widths[k + 1]);
            let off = self.offsets[k];
            let mut z = Vec::with_capacity(n_out);
            for i in 0..n_out {
                let mut acc = params[off + n_in * n_out + i].clone();
                for (j, hj) in h.iter().enumerate() {
                    acc = acc + params[off + i * n_in + j].clone() * hj.clone();
                }
                z.push(acc);
            }
            h = if k + 1 < self.layers() {
                z.iter().map(|v| v.tanh()).collect()
            } else {
                z
            };
        }
        h.pop().unwrap()
    }

    pub fn forward(&self, p: Point) -> f64 {
        self.forward_generic(&self.params, p[0], p[1])
    }

    /// Batched jet forward pass; columns are `point × channel`.
    pub fn forward_batch(&self, pts: &[Point], order: Order) -> (Vec<JetRow>, MlpCache) {
        let nch = order.channels();
        let cols = pts.len() * nch;
        let mut h = Array2::<f64>::zeros((2, cols));
        for (p, pt) in pts.iter().enumerate() {
            let b = p * nch;
            h[[0, b]] = pt[0];
            h[[1, b]] = pt[1];
            if nch >= 3 {
                h[[0, b + 1]] = 1.0;
                h[[1, b + 2]] = 1.0;
            }
        }
        let mut inputs = Vec::with_capacity(self.layers());
        let mut pre = Vec::with_capacity(self.layers());
        for k in 0..self.layers() {
            let n_out = self.widths[k + 1];
            let mut z = Array2::<f64>::zeros((n_out, cols));
            general_mat_mul(1.0, &self.weight(k), &h, 0.0, &mut z);
            let bias = self.bias(k);
            for (i, mut row) in z.rows_mut().into_iter().enumerate() {
                let row = row.as_slice_mut().unwrap();
                for p in 0..pts.len() {
                    row[p * nch] += bias[i];
                }
            }
            inputs.push(h);
            if k + 1 < self.layers() {
                h = tanh_jets(z.view(), nch);
                pre.push(z);
            } else {
                h = z;
            }
        }
        let out_row = h.row(0);
        let out_row = out_row.as_slice().unwrap();
        let mut out = vec![[0.0; 6]; pts.len()];
        for (p, jet) in out.iter_mut().enumerate() {
            jet[..nch].copy_from_slice(&out_row[p * nch..(p + 1) * nch]);
        }
        (
            out,
            MlpCache {
                nch,
                n_points: pts.len(),
                inputs,
                pre,
            },
        )
    }

    /// Accumulates `Σ_p seeds[p] · ∂jet_p/∂θ` into `grad`.
    pub fn backward_batch(&self, cache: &MlpCache, seeds: &[JetRow], grad: &mut [f64]) {
        let nch = cache.nch;
        let cols = cache.n_points * nch;
        let mut adj = Array2::<f64>::zeros((1, cols));
        {
            let row = adj.as_slice_mut().unwrap();
            for (p, s) in seeds.iter().enumerate() {
                row[p * nch..(p + 1) * nch].copy_from_slice(&s[..nch]);
            }
        }
        for k in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.widths[k], self.widths[k + 1]);
            let off = self.offsets[k];
            let h = &cache.inputs[k];
            {
                let mut gw =
                    ArrayViewMut2::from_shape((n_out, n_in), &mut grad[off..off + n_in * n_out]).unwrap();
                general_mat_mul(1.0, &adj, &h.t(), 1.0, &mut gw);
            }
            let gb = &mut grad[off + n_in * n_out..off + n_in * n_out + n_out];
            for (i, row) in adj.rows().into_iter().enumerate() {
                let row = row.as_slice().unwrap();
                let mut acc = 0.0;
                for p in 0..cache.n_points {
                    acc += row[p * nch];
                }
                gb[i] += acc;
            }
            if k == 0 {
                break;
            }
            let mut adj_h = Array2::<f64>::zeros((n_in, cols));
            general_mat_mul(1.0, &self.weight(k).t(), &adj, 0.0, &mut adj_h);
            adj = tanh_jets_backward(cache.pre[k - 1].view(), h.view(), adj_h.view(), nch);
        }
    }
}

/// Cached activations of a batched MLP forward pass.
#[derive(Debug)]
pub struct MlpCache {
    nch: usize,
    n_points: usize,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

fn tanh_jets(z: ArrayView2<'_, f64>, nch: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(z.raw_dim());
    for (zr, mut hr) in z.rows().into_iter().zip(out.rows_mut()) {
        let zr = zr.as_slice().unwrap();
        let hr = hr.as_slice_mut().unwrap();
        for (zj, hj) in zr.chunks_exact(nch).zip(hr.chunks_exact_mut(nch)) {
            let t = zj[0].tanh();
            let s1 = 1.0 - t * t;
            hj[0] = t;
            if nch >= 3 {
                hj[1] = s1 * zj[1];
                hj[2] = s1 * zj[2];
            }
            if nch >= 5 {
                let s2 = -2.0 * t * s1;
                hj[3] = s2 * zj[1] * zj[1] + s1 * zj[3];
                hj[4] = s2 * zj[2] * zj[2] + s1 * zj[4];
                if nch == 6 {
                    hj[5] = s2 * zj[1] * zj[2] + s1 * zj[5];
                }
            }
        }
    }
    out
}

/// Adjoint of [`tanh_jets`]; `h` holds its cached output.
fn tanh_jets_backward(z: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>, adj_h: ArrayView2<'_, f64>, nch: usize) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros(z.raw_dim());
    for (((zr, hr), ar), mut or) in z.rows().into_iter().zip(h.rows()).zip(adj_h.rows()).zip(out.rows_mut()) {
        let zr = zr.as_slice().unwrap();
        let hr = hr.as_slice().unwrap();
        let ar = ar.as_slice().unwrap();
        let or = or.as_slice_mut().unwrap();
        for (((zj, hj), aj), oj) in zr
            .chunks_exact(nch)
            .zip(hr.chunks_exact(nch))
            .zip(ar.chunks_exact(nch))
            .zip(or.chunks_exact_mut(nch))
        {
            let t = hj[0];
            let s1 = 1.0 - t * t;
            if nch == 1 {
                oj[0] = aj[0] * s1;
                continue;
            }
            let s2 = -2.0 * t * s1;
            let mut av = aj[0] * s1 + aj[1] * s2 * zj[1] + aj[2] * s2 * zj[2];
            oj[1] = aj[1] * s1;
            oj[2] = aj[2] * s1;
            if nch >= 5 {
                let s3 = -2.0 * (s1 * s1 + t * s2);
                let (dx, dy) = (zj[1], zj[2]);
                av += aj[3] * (s3 * dx * dx + s2 * zj[3]) + aj[4] * (s3 * dy * dy + s2 * zj[4]);
                oj[1] += 2.0 * aj[3] * s2 * dx;
                oj[2] += 2.0 * aj[4] * s2 * dy;
                oj[3] = aj[3] * s1;
                oj[4] = aj[4] * s1;
                if nch == 6 {
                    av += aj[5] * (s3 * dx * dy + s2 * zj[5]);
                    oj[1] += aj[5] * s2 * dy;
                    oj[2] += aj[5] * s2 * dx;
                    oj[5] = aj[5] * s1;
                }
            }
            oj[0] = av;
        }
    }
    out
}

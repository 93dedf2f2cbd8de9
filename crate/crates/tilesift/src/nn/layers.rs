//! Layer forward/backward kernels.
//!
//! Convolution is 3x3, stride 1, zero-padded to keep spatial dims ("same"),
//! applied as cross-correlation (no kernel flip). Pooling is 2x2 stride 2
//! with floor output dims; a trailing odd row/column is simply unused and
//! receives zero gradient. Dropout is inverted: surviving activations are
//! scaled by 1/(1-rate) at train time so inference is a plain identity.
//!
//! Determinism: parallel work is split over disjoint (sample, channel)
//! planes only, and every floating-point accumulation happens in a fixed
//! order within one plane, so results are independent of thread count.
//! All randomness (dropout masks) is drawn sequentially by the caller's
//! RNG in buffer order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tensor::Tensor4;
use super::Scalar;

/// 3x3 same-padding convolution parameters. Weights are stored
/// (out_ch, in_ch, ky, kx) row-major; one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv2d<S> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

/// Fully connected layer. Weights are (out, in) row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense<S> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer<S> {
    Conv(Conv2d<S>),
    Relu,
    MaxPool,
    Dropout { rate: f64 },
    Flatten,
    Dense(Dense<S>),
    Sigmoid,
}

/// Per-layer state saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache<S> {
    /// Conv/Dense: the layer input.
    Input(Tensor4<S>),
    /// ReLU and Dropout: per-element multiplier (0/1, or 0/scale).
    Mask(Vec<S>),
    /// MaxPool: flat input index of each output element's maximum.
    PoolArgmax {
        in_dims: [usize; 4],
        indices: Vec<usize>,
    },
    /// Flatten: the shape to restore on the way back.
    InDims([usize; 4]),
    /// Sigmoid: the output (its derivative is out*(1-out)).
    Output(Tensor4<S>),
    /// Identity layers (inference-mode dropout).
    None,
}

/// Parameter gradients for one layer.
#[derive(Debug, Clone)]
pub(crate) struct LayerGrads<S> {
    pub dw: Vec<S>,
    pub db: Vec<S>,
}

impl<S: Scalar> Conv2d<S> {
    fn kernel(&self, co: usize, ci: usize) -> &[S] {
        &self.weights[(co * self.in_ch + ci) * 9..][..9]
    }

    pub fn forward(&self, x: &Tensor4<S>) -> Tensor4<S> {
        let [n, cin, h, w] = x.dims();
        assert_eq!(cin, self.in_ch);
        let mut out = Tensor4::zeros(n, self.out_ch, h, w);
        let out_ch = self.out_ch;
        out.data_mut()
            .par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(plane_idx, plane)| {
                let ni = plane_idx / out_ch;
                let co = plane_idx % out_ch;
                plane.fill(self.bias[co]);
                for ci in 0..self.in_ch {
                    let xp = x.plane(ni, ci);
                    let k = self.kernel(co, ci);
                    accumulate_correlation(plane, xp, k, h, w);
                }
            });
        out
    }

    /// Returns (d_input, d_weights, d_bias).
    pub fn backward(&self, x: &Tensor4<S>, dout: &Tensor4<S>) -> (Tensor4<S>, Vec<S>, Vec<S>) {
        let [n, cin, h, w] = x.dims();
        let mut dx = Tensor4::zeros(n, cin, h, w);
        // d_input planes are disjoint per (sample, in-channel)
        dx.data_mut()
            .par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(plane_idx, dxp)| {
                let ni = plane_idx / cin;
                let ci = plane_idx % cin;
                for co in 0..self.out_ch {
                    let dop = dout.plane(ni, co);
                    let k = self.kernel(co, ci);
                    scatter_correlation(dxp, dop, k, h, w);
                }
            });
        // weight/bias gradients are disjoint per out-channel; samples are
        // accumulated in index order inside, keeping sums deterministic
        let mut dw = vec![S::zero(); self.weights.len()];
        let mut db = vec![S::zero(); self.out_ch];
        let per_co = self.in_ch * 9;
        dw.par_chunks_mut(per_co)
            .zip(db.par_iter_mut())
            .enumerate()
            .for_each(|(co, (dw_co, db_co))| {
                for ni in 0..n {
                    let dop = dout.plane(ni, co);
                    *db_co += dop.iter().copied().sum::<S>();
                    for ci in 0..cin {
                        let xp = x.plane(ni, ci);
                        correlate_planes(&mut dw_co[ci * 9..ci * 9 + 9], dop, xp, h, w);
                    }
                }
            });
        (dx, dw, db)
    }
}

/// plane += cross-correlation of `xp` with the 3x3 kernel `k`.
fn accumulate_correlation<S: Scalar>(plane: &mut [S], xp: &[S], k: &[S], h: usize, w: usize) {
    for (tap, &kval) in k.iter().enumerate() {
        let dy = (tap / 3) as isize - 1;
        let dx = (tap % 3) as isize - 1;
        let (oy0, oy1) = row_range(h, dy);
        let (ox0, ox1) = row_range(w, dx);
        let ix0 = (ox0 as isize + dx) as usize;
        let span = ox1 - ox0;
        for oy in oy0..oy1 {
            let iy = (oy as isize + dy) as usize;
            let orow = &mut plane[oy * w + ox0..oy * w + ox1];
            let irow = &xp[iy * w + ix0..iy * w + ix0 + span];
            for (o, &i) in orow.iter_mut().zip(irow) {
                *o += kval * i;
            }
        }
    }
}

/// dxp += transposed correlation: each dout element is distributed back to
/// the 3x3 input window it was read from.
fn scatter_correlation<S: Scalar>(dxp: &mut [S], dop: &[S], k: &[S], h: usize, w: usize) {
    for (tap, &kval) in k.iter().enumerate() {
        let dy = (tap / 3) as isize - 1;
        let dx = (tap % 3) as isize - 1;
        let (oy0, oy1) = row_range(h, dy);
        let (ox0, ox1) = row_range(w, dx);
        let ix0 = (ox0 as isize + dx) as usize;
        let span = ox1 - ox0;
        for oy in oy0..oy1 {
            let iy = (oy as isize + dy) as usize;
            let dorow = &dop[oy * w + ox0..oy * w + ox1];
            let dxrow = &mut dxp[iy * w + ix0..iy * w + ix0 + span];
            for (x, &d) in dxrow.iter_mut().zip(dorow) {
                *x += kval * d;
            }
        }
    }
}

/// dw[tap] += sum over valid positions of dout[o] * x[o + offset(tap)].
fn correlate_planes<S: Scalar>(dw9: &mut [S], dop: &[S], xp: &[S], h: usize, w: usize) {
    for (tap, dw) in dw9.iter_mut().enumerate() {
        let dy = (tap / 3) as isize - 1;
        let dx = (tap % 3) as isize - 1;
        let (oy0, oy1) = row_range(h, dy);
        let (ox0, ox1) = row_range(w, dx);
        let ix0 = (ox0 as isize + dx) as usize;
        let span = ox1 - ox0;
        let mut acc = S::zero();
        for oy in oy0..oy1 {
            let iy = (oy as isize + dy) as usize;
            let dorow = &dop[oy * w + ox0..oy * w + ox1];
            let irow = &xp[iy * w + ix0..iy * w + ix0 + span];
            for (&d, &i) in dorow.iter().zip(irow) {
                acc += d * i;
            }
        }
        *dw += acc;
    }
}

/// Output rows for which `row + offset` stays inside [0, dim).
#[inline]
fn row_range(dim: usize, offset: isize) -> (usize, usize) {
    let start = if offset < 0 { 1 } else { 0 };
    let end = if offset > 0 { dim - 1 } else { dim };
    (start, end)
}

impl<S: Scalar> Dense<S> {
    pub fn forward(&self, x: &Tensor4<S>) -> Tensor4<S> {
        let [n, c, h, w] = x.dims();
        assert_eq!(c * h * w, self.in_dim);
        let mut out = Tensor4::zeros(n, self.out_dim, 1, 1);
        for ni in 0..n {
            let xrow = &x.data()[ni * self.in_dim..(ni + 1) * self.in_dim];
            for o in 0..self.out_dim {
                let wrow = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.bias[o];
                for (xv, wv) in xrow.iter().zip(wrow.iter()) {
                    acc += *xv * *wv;
                }
                *out.at_mut(ni, o, 0, 0) = acc;
            }
        }
        out
    }

    pub fn backward(&self, x: &Tensor4<S>, dout: &Tensor4<S>) -> (Tensor4<S>, Vec<S>, Vec<S>) {
        let [n, ..] = x.dims();
        let mut dx = Tensor4::zeros(n, self.in_dim, 1, 1);
        let mut dw = vec![S::zero(); self.weights.len()];
        let mut db = vec![S::zero(); self.out_dim];
        for ni in 0..n {
            let xrow = &x.data()[ni * self.in_dim..(ni + 1) * self.in_dim];
            let dxrow = &mut dx.data_mut()[ni * self.in_dim..(ni + 1) * self.in_dim];
            for o in 0..self.out_dim {
                let g = dout.at(ni, o, 0, 0);
                db[o] += g;
                let wrow = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                let dwrow = &mut dw[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    dxrow[i] += g * wrow[i];
                    dwrow[i] += g * xrow[i];
                }
            }
        }
        (dx, dw, db)
    }
}

pub(crate) fn relu_forward<S: Scalar>(x: &Tensor4<S>) -> (Tensor4<S>, Vec<S>) {
    let mut out = x.clone();
    let mut mask = vec![S::zero(); x.len()];
    for (v, m) in out.data_mut().iter_mut().zip(mask.iter_mut()) {
        if *v > S::zero() {
            *m = S::one();
        } else {
            *v = S::zero();
        }
    }
    (out, mask)
}

pub(crate) fn maxpool_forward<S: Scalar>(x: &Tensor4<S>) -> (Tensor4<S>, Vec<usize>) {
    let [n, c, h, w] = x.dims();
    let (oh, ow) = (h / 2, w / 2);
    assert!(oh > 0 && ow > 0, "pool input {h}x{w} too small");
    let mut out = Tensor4::zeros(n, c, oh, ow);
    let mut indices = vec![0usize; out.len()];
    let mut oi = 0;
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    // scan the 2x2 window in fixed order; ties keep the first
                    let mut best_idx = base + (oy * 2) * w + ox * 2;
                    let mut best = x.data()[best_idx];
                    for (ky, kx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (oy * 2 + ky) * w + ox * 2 + kx;
                        let v = x.data()[idx];
                        if v > best {
                            best = v;
                            best_idx = idx;
                        }
                    }
                    out.data_mut()[oi] = best;
                    indices[oi] = best_idx;
                    oi += 1;
                }
            }
        }
    }
    (out, indices)
}

pub(crate) fn maxpool_backward<S: Scalar>(
    in_dims: [usize; 4],
    indices: &[usize],
    dout: &Tensor4<S>,
) -> Tensor4<S> {
    let [n, c, h, w] = in_dims;
    let mut dx = Tensor4::zeros(n, c, h, w);
    for (&idx, &g) in indices.iter().zip(dout.data().iter()) {
        dx.data_mut()[idx] = dx.data_mut()[idx] + g;
    }
    dx
}

/// Inverted dropout: multiplier 0 with probability `rate`, else
/// 1/(1-rate). One RNG draw per element, in buffer order.
pub(crate) fn dropout_mask<S: Scalar>(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<S> {
    let scale = S::from(1.0 / (1.0 - rate)).expect("rate < 1");
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < rate {
                S::zero()
            } else {
                scale
            }
        })
        .collect()
}

pub(crate) fn apply_mask<S: Scalar>(x: &Tensor4<S>, mask: &[S]) -> Tensor4<S> {
    let mut out = x.clone();
    for (v, m) in out.data_mut().iter_mut().zip(mask.iter()) {
        *v *= *m;
    }
    out
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

pub(crate) fn sigmoid_forward<S: Scalar>(x: &Tensor4<S>) -> Tensor4<S> {
    let mut out = x.clone();
    for v in out.data_mut().iter_mut() {
        *v = sigmoid(*v);
    }
    out
}

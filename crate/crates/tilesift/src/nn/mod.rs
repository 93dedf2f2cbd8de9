//! A small, self-contained convolutional network engine: forward and
//! backward passes, Adam training with per-epoch checkpoints, bit-exact
//! serialization, and parameter/FLOP accounting.
//!
//! The engine is generic over the float type: `f32` for production,
//! `f64` for gradient verification against finite differences.
//!
//! FLOP accounting convention (one forward pass, batch 1):
//! * convolution: `2 * H * W * out_ch * 9 * in_ch` for the multiply-adds,
//!   plus `H * W * out_ch` bias adds;
//! * dense: `2 * in * out` plus `out` bias adds;
//! * ReLU: 1 per element; max-pool: 3 per output element (comparisons);
//!   sigmoid: 4 per element; dropout and flatten: 0.
//!
//! Reported figures are only comparable across implementations that state
//! the same convention.

mod io;
mod layers;
mod tensor;
mod train;

pub use io::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use tensor::Tensor4;
pub use train::{
    batch_tensor, bce_loss, checkpoint_name, gradient_check, train, EpochStats, GradCheckReport,
    LabeledTile, TrainConfig,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use layers::{
    apply_mask, dropout_mask, maxpool_backward, maxpool_forward, relu_forward, sigmoid_forward,
    Cache, Conv2d, Dense, Layer, LayerGrads,
};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("unsupported tile size {0}: expected 100..650 in steps of 50, or a multiple of 16 >= 32")]
    UnsupportedTileSize(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no training tiles supplied")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model file: {0}")]
    Format(String),
    #[error("model format version {found} is not supported (this build reads version {supported})")]
    Version { found: u32, supported: u32 },
}

/// Float type the engine is generic over.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssignOps
    + std::iter::Sum
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn cast<S: Scalar>(v: f64) -> S {
    S::from(v).expect("value representable in scalar type")
}

/// Architectural description of one layer, independent of weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3x3, stride 1, zero-padded to preserve spatial dims.
    Conv { in_ch: usize, out_ch: usize },
    Relu,
    /// 2x2, stride 2, floor output dims.
    MaxPool,
    Dropout { rate: f64 },
    Flatten,
    Dense { in_dim: usize, out_dim: usize },
    Sigmoid,
}

/// Dropout behavior for a forward pass.
pub enum DropoutMode<'a> {
    /// Dropout layers are identities.
    Inference,
    /// Dropout masks are drawn from this RNG, one element at a time in
    /// buffer order, with survivors scaled by 1/(1-rate).
    Train(&'a mut ChaCha8Rng),
}

/// A feed-forward stack ending in a single sigmoid probability per sample.
///
/// Models are deterministic functions of (layer specs, seed): building the
/// same architecture from the same seed yields bit-identical weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<S: Scalar = f32> {
    input_size: u32,
    seed: u64,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer<S>>,
}

/// The standard classification stack for square tiles of side `tile_size`:
/// four 3x3 conv blocks (16, 32, 48, 64 filters) each followed by ReLU and
/// 2x2 max-pool, dropout 0.25 after the last three blocks, then a flatten,
/// a 48-wide ReLU dense layer, and a single sigmoid output.
///
/// Accepted tile sizes: 100..650 in steps of 50, or any multiple of 16
/// that is at least 32.
pub fn build_reference_model<S: Scalar>(tile_size: u32, seed: u64) -> Result<CnnModel<S>, NnError> {
    let in_steps = (100..=650).step_by(50).any(|s| s == tile_size);
    let multiple_of_16 = tile_size >= 32 && tile_size.is_multiple_of(16);
    if !in_steps && !multiple_of_16 {
        return Err(NnError::UnsupportedTileSize(tile_size));
    }
    let s = tile_size as usize;
    let after_pools = s / 2 / 2 / 2 / 2;
    let flat = after_pools * after_pools * 64;
    let specs = vec![
        LayerSpec::Conv { in_ch: 3, out_ch: 16 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Conv { in_ch: 16, out_ch: 32 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::Conv { in_ch: 32, out_ch: 48 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::Conv { in_ch: 48, out_ch: 64 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::Flatten,
        LayerSpec::Dense { in_dim: flat, out_dim: 48 },
        LayerSpec::Relu,
        LayerSpec::Dense { in_dim: 48, out_dim: 1 },
        LayerSpec::Sigmoid,
    ];
    CnnModel::from_specs(tile_size, seed, specs)
}

impl<S: Scalar> CnnModel<S> {
    /// Build a model from an explicit layer stack, validating shape
    /// compatibility, and initialize weights from `seed`.
    ///
    /// Weights draw He-uniform (limit `sqrt(6 / fan_in)`) in storage
    /// order; biases start at zero.
    pub fn from_specs(
        input_size: u32,
        seed: u64,
        specs: Vec<LayerSpec>,
    ) -> Result<CnnModel<S>, NnError> {
        validate_stack(input_size, &specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|spec| init_layer(spec, &mut rng))
            .collect();
        Ok(CnnModel {
            input_size,
            seed,
            specs,
            layers,
        })
    }

    pub fn input_size(&self) -> u32 {
        self.input_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layer_specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Forward pass returning one probability per sample.
    pub fn forward(&self, batch: &Tensor4<S>, mode: DropoutMode) -> Result<Vec<S>, NnError> {
        let (probs, _) = self.forward_trace(batch, mode)?;
        Ok(probs)
    }

    /// Inference-mode forward pass (dropout inactive).
    pub fn predict(&self, batch: &Tensor4<S>) -> Result<Vec<S>, NnError> {
        self.forward(batch, DropoutMode::Inference)
    }

    pub(crate) fn forward_trace(
        &self,
        batch: &Tensor4<S>,
        mut mode: DropoutMode,
    ) -> Result<(Vec<S>, Vec<Cache<S>>), NnError> {
        let [n, c, h, w] = batch.dims();
        let s = self.input_size as usize;
        let expected_c = first_in_channels(&self.specs);
        if (c, h, w) != (expected_c, s, s) {
            return Err(NnError::ShapeMismatch(format!(
                "batch dims {:?} do not match model input {expected_c}x{s}x{s}",
                batch.dims(),
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let (out, cache) = match layer {
                Layer::Conv(conv) => {
                    let out = conv.forward(&x);
                    (out, Cache::Input(x))
                }
                Layer::Relu => {
                    let (out, mask) = relu_forward(&x);
                    (out, Cache::Mask(mask))
                }
                Layer::MaxPool => {
                    let in_dims = x.dims();
                    let (out, indices) = maxpool_forward(&x);
                    (out, Cache::PoolArgmax { in_dims, indices })
                }
                Layer::Dropout { rate } => match &mut mode {
                    DropoutMode::Train(rng) if *rate > 0.0 => {
                        let mask = dropout_mask(x.len(), *rate, rng);
                        (apply_mask(&x, &mask), Cache::Mask(mask))
                    }
                    _ => (x.clone(), Cache::None),
                },
                Layer::Flatten => {
                    let in_dims = x.dims();
                    let flat = in_dims[1] * in_dims[2] * in_dims[3];
                    (
                        x.clone().reshaped([n, flat, 1, 1])?,
                        Cache::InDims(in_dims),
                    )
                }
                Layer::Dense(dense) => {
                    let out = dense.forward(&x);
                    (out, Cache::Input(x))
                }
                Layer::Sigmoid => {
                    let out = sigmoid_forward(&x);
                    (out.clone(), Cache::Output(out))
                }
            };
            x = out;
            caches.push(cache);
        }
        debug_assert_eq!(x.len(), n);
        Ok((x.data().to_vec(), caches))
    }

    /// Backward pass from per-sample probability gradients. Returns
    /// parameter gradients aligned with the layer list (None for
    /// parameterless layers).
    pub(crate) fn backward(
        &self,
        caches: &[Cache<S>],
        dprobs: &[S],
    ) -> Result<Vec<Option<LayerGrads<S>>>, NnError> {
        let n = dprobs.len();
        let mut grad = Tensor4::from_vec([n, 1, 1, 1], dprobs.to_vec())?;
        let mut out: Vec<Option<LayerGrads<S>>> = vec![None; self.layers.len()];
        for (idx, (layer, cache)) in self.layers.iter().zip(caches.iter()).enumerate().rev() {
            grad = match (layer, cache) {
                (Layer::Conv(conv), Cache::Input(x)) => {
                    let (dx, dw, db) = conv.backward(x, &grad);
                    out[idx] = Some(LayerGrads { dw, db });
                    dx
                }
                (Layer::Dense(dense), Cache::Input(x)) => {
                    let (dx, dw, db) = dense.backward(x, &grad);
                    out[idx] = Some(LayerGrads { dw, db });
                    dx
                }
                (Layer::Relu, Cache::Mask(mask)) | (Layer::Dropout { .. }, Cache::Mask(mask)) => {
                    apply_mask(&grad, mask)
                }
                (Layer::Dropout { .. }, Cache::None) => grad,
                (Layer::MaxPool, Cache::PoolArgmax { in_dims, indices }) => {
                    maxpool_backward(*in_dims, indices, &grad)
                }
                (Layer::Flatten, Cache::InDims(dims)) => grad.reshaped(*dims)?,
                (Layer::Sigmoid, Cache::Output(p)) => {
                    let mut dz = grad;
                    for (g, &pv) in dz.data_mut().iter_mut().zip(p.data().iter()) {
                        *g = *g * pv * (S::one() - pv);
                    }
                    dz
                }
                _ => {
                    return Err(NnError::InvalidStack(
                        "cache does not match layer during backward".into(),
                    ))
                }
            };
        }
        Ok(out)
    }

    pub(crate) fn layers(&self) -> &[Layer<S>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<S>] {
        &mut self.layers
    }
}

fn first_in_channels(specs: &[LayerSpec]) -> usize {
    match specs.first() {
        Some(LayerSpec::Conv { in_ch, .. }) => *in_ch,
        _ => 3,
    }
}

fn init_layer<S: Scalar>(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Layer<S> {
    let mut he_uniform = |count: usize, fan_in: usize| -> Vec<S> {
        let limit = (6.0 / fan_in as f64).sqrt();
        (0..count)
            .map(|_| cast::<S>(limit * (2.0 * rng.gen::<f64>() - 1.0)))
            .collect()
    };
    match *spec {
        LayerSpec::Conv { in_ch, out_ch } => Layer::Conv(Conv2d {
            in_ch,
            out_ch,
            weights: he_uniform(out_ch * in_ch * 9, in_ch * 9),
            bias: vec![S::zero(); out_ch],
        }),
        LayerSpec::Relu => Layer::Relu,
        LayerSpec::MaxPool => Layer::MaxPool,
        LayerSpec::Dropout { rate } => Layer::Dropout { rate },
        LayerSpec::Flatten => Layer::Flatten,
        LayerSpec::Dense { in_dim, out_dim } => Layer::Dense(Dense {
            in_dim,
            out_dim,
            weights: he_uniform(out_dim * in_dim, in_dim),
            bias: vec![S::zero(); out_dim],
        }),
        LayerSpec::Sigmoid => Layer::Sigmoid,
    }
}

/// Shape of the data flowing between layers: (channels, height, width).
fn validate_stack(input_size: u32, specs: &[LayerSpec]) -> Result<(), NnError> {
    if specs.is_empty() {
        return Err(NnError::InvalidStack("no layers".into()));
    }
    let s = input_size as usize;
    if s == 0 {
        return Err(NnError::InvalidStack("input size 0".into()));
    }
    let mut c = first_in_channels(specs);
    let (mut h, mut w) = (s, s);
    let mut flattened = false;
    for (i, spec) in specs.iter().enumerate() {
        let fail = |msg: String| Err(NnError::InvalidStack(format!("layer {i}: {msg}")));
        match *spec {
            LayerSpec::Conv { in_ch, out_ch } => {
                if flattened {
                    return fail("conv after flatten".into());
                }
                if in_ch != c {
                    return fail(format!("conv expects {in_ch} channels, gets {c}"));
                }
                if out_ch == 0 {
                    return fail("conv with 0 output channels".into());
                }
                c = out_ch;
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => {}
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return fail(format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            LayerSpec::MaxPool => {
                if flattened {
                    return fail("pool after flatten".into());
                }
                if h < 2 || w < 2 {
                    return fail(format!("cannot pool {h}x{w}"));
                }
                h /= 2;
                w /= 2;
            }
            LayerSpec::Flatten => {
                if flattened {
                    return fail("second flatten".into());
                }
                c = c * h * w;
                h = 1;
                w = 1;
                flattened = true;
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                if !flattened && (h, w) != (1, 1) {
                    return fail("dense before flatten".into());
                }
                if in_dim != c {
                    return fail(format!("dense expects {in_dim} inputs, gets {c}"));
                }
                if out_dim == 0 {
                    return fail("dense with 0 outputs".into());
                }
                c = out_dim;
                flattened = true;
            }
        }
    }
    if !matches!(specs.last(), Some(LayerSpec::Sigmoid)) {
        return Err(NnError::InvalidStack("stack must end in sigmoid".into()));
    }
    if c * h * w != 1 {
        return Err(NnError::InvalidStack(format!(
            "stack must end with a single output, got {c}x{h}x{w}"
        )));
    }
    Ok(())
}

/// Trainable parameter count and forward-pass FLOPs at batch 1, under the
/// convention documented at the module level.
pub fn count_params_flops<S: Scalar>(model: &CnnModel<S>) -> (u64, u64) {
    let s = model.input_size() as u64;
    let mut c = first_in_channels(model.layer_specs()) as u64;
    let (mut h, mut w) = (s, s);
    let mut params = 0u64;
    let mut flops = 0u64;
    for spec in model.layer_specs() {
        match *spec {
            LayerSpec::Conv { in_ch, out_ch } => {
                let (ic, oc) = (in_ch as u64, out_ch as u64);
                params += oc * (ic * 9 + 1);
                flops += 2 * h * w * oc * 9 * ic + h * w * oc;
                c = oc;
            }
            LayerSpec::Relu => flops += c * h * w,
            LayerSpec::MaxPool => {
                h /= 2;
                w /= 2;
                flops += 3 * c * h * w;
            }
            LayerSpec::Dropout { .. } => {}
            LayerSpec::Flatten => {
                c *= h * w;
                h = 1;
                w = 1;
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                let (i, o) = (in_dim as u64, out_dim as u64);
                params += o * (i + 1);
                flops += 2 * i * o + o;
                c = o;
            }
            LayerSpec::Sigmoid => flops += 4 * c * h * w,
        }
    }
    (params, flops)
}

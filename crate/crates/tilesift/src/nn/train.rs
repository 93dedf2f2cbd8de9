//! Training loop: binary cross-entropy loss, Adam updates, flip
//! augmentation, per-epoch checkpoints, and finite-difference gradient
//! verification.
//!
//! Reproducibility contract: one RNG seeded from the config drives the
//! whole run. Per epoch it is consumed in this exact order: the index
//! shuffle, then per batch the flip draws (two per sample, in batch
//! order) followed by the dropout masks inside the forward pass. Nothing
//! else draws from it, so equal (model, tiles, config) produce
//! byte-identical checkpoints.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Layer, LayerGrads};
use super::tensor::Tensor4;
use super::{cast, save_model, CnnModel, DropoutMode, NnError, Scalar};
use crate::raster::{ColorMode, RasterImage};

/// Clamp bound keeping log() finite at saturated probabilities.
const PROB_EPS: f64 = 1e-7;

/// One training example: a square image and its class.
#[derive(Debug, Clone)]
pub struct LabeledTile {
    image: RasterImage,
    label: u8,
}

impl LabeledTile {
    /// Grayscale images are expanded to RGB; labels must be 0 or 1.
    pub fn new(image: RasterImage, label: u8) -> Result<Self, NnError> {
        if label > 1 {
            return Err(NnError::InvalidConfig(format!(
                "label must be 0 or 1, got {label}"
            )));
        }
        if image.width() != image.height() || image.is_empty() {
            return Err(NnError::ShapeMismatch(format!(
                "tiles must be square and non-empty, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        let image = match image.mode() {
            ColorMode::Rgb => image,
            ColorMode::Gray => image.to_rgb(),
        };
        Ok(Self { image, label })
    }

    pub fn image(&self) -> &RasterImage {
        &self.image
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

/// Hyperparameters for one training run. Adam runs with the standard
/// moment decays (0.9, 0.999) and epsilon 1e-8; only the learning rate is
/// configurable.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Independent 50% horizontal and 50% vertical flips per sample per
    /// epoch.
    pub augment_flips: bool,
    pub seed: u64,
    /// One checkpoint is written here per epoch.
    pub checkpoint_dir: PathBuf,
}

impl TrainConfig {
    pub fn new(checkpoint_dir: impl Into<PathBuf>) -> Self {
        Self {
            epochs: 35,
            batch_size: 16,
            learning_rate: 1e-3,
            augment_flips: true,
            seed: 0,
            checkpoint_dir: checkpoint_dir.into(),
        }
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Outcome of one training epoch.
#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub checkpoint: PathBuf,
}

/// Mean binary cross-entropy over a batch, probabilities clamped to
/// [1e-7, 1 - 1e-7]. A constant probability of 0.5 scores ln 2 for
/// either label.
pub fn bce_loss<S: Scalar>(probs: &[S], labels: &[u8]) -> S {
    assert_eq!(probs.len(), labels.len());
    let eps = cast::<S>(PROB_EPS);
    let one = S::one();
    let mut total = S::zero();
    for (&p, &y) in probs.iter().zip(labels.iter()) {
        let p = p.max(eps).min(one - eps);
        let term = if y == 1 { p.ln() } else { (one - p).ln() };
        total -= term;
    }
    total / cast::<S>(probs.len() as f64)
}

/// d(mean BCE)/d(probability) per sample, through the same clamp as
/// [`bce_loss`].
fn bce_grad<S: Scalar>(probs: &[S], labels: &[u8]) -> Vec<S> {
    let eps = cast::<S>(PROB_EPS);
    let one = S::one();
    let n = cast::<S>(probs.len() as f64);
    probs
        .iter()
        .zip(labels.iter())
        .map(|(&p, &y)| {
            let p = p.max(eps).min(one - eps);
            let g = if y == 1 { -one / p } else { one / (one - p) };
            g / n
        })
        .collect()
}

/// Write image samples into one tensor sample slot, scaled to [0, 1],
/// channel-planar, with optional mirror flips.
fn fill_sample<S: Scalar>(
    dst: &mut [S],
    img: &RasterImage,
    size: usize,
    flip_h: bool,
    flip_v: bool,
) {
    let scale = cast::<S>(1.0 / 255.0);
    for c in 0..3u8 {
        for y in 0..size {
            let sy = if flip_v { size - 1 - y } else { y } as u32;
            for x in 0..size {
                let sx = if flip_h { size - 1 - x } else { x } as u32;
                dst[(c as usize * size + y) * size + x] =
                    cast::<S>(img.sample(sx, sy, c) as f64) * scale;
            }
        }
    }
}

/// Pack tiles into an inference batch tensor (no flips).
pub fn batch_tensor<S: Scalar>(
    tiles: &[&RasterImage],
    size: usize,
) -> Result<Tensor4<S>, NnError> {
    if tiles.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut t = Tensor4::zeros(tiles.len(), 3, size, size);
    let stride = 3 * size * size;
    for (i, img) in tiles.iter().enumerate() {
        if img.width() as usize != size || img.height() as usize != size {
            return Err(NnError::ShapeMismatch(format!(
                "tile {} is {}x{}, model wants {size}x{size}",
                i,
                img.width(),
                img.height()
            )));
        }
        if img.mode() != ColorMode::Rgb {
            return Err(NnError::ShapeMismatch("tiles must be RGB".into()));
        }
        fill_sample(&mut t.data_mut()[i * stride..(i + 1) * stride], img, size, false, false);
    }
    Ok(t)
}

/// Adam optimizer state: first/second moment estimates per parameter,
/// shared step counter, bias-corrected updates.
struct Adam<S> {
    lr: S,
    beta1: S,
    beta2: S,
    eps: S,
    t: i32,
    moments: Vec<Option<Moments<S>>>,
}

struct Moments<S> {
    mw: Vec<S>,
    vw: Vec<S>,
    mb: Vec<S>,
    vb: Vec<S>,
}

impl<S: Scalar> Adam<S> {
    fn new(model: &CnnModel<S>, lr: f64) -> Self {
        let moments = model
            .layers()
            .iter()
            .map(|layer| match layer {
                Layer::Conv(c) => Some(Moments {
                    mw: vec![S::zero(); c.weights.len()],
                    vw: vec![S::zero(); c.weights.len()],
                    mb: vec![S::zero(); c.bias.len()],
                    vb: vec![S::zero(); c.bias.len()],
                }),
                Layer::Dense(d) => Some(Moments {
                    mw: vec![S::zero(); d.weights.len()],
                    vw: vec![S::zero(); d.weights.len()],
                    mb: vec![S::zero(); d.bias.len()],
                    vb: vec![S::zero(); d.bias.len()],
                }),
                _ => None,
            })
            .collect();
        Adam {
            lr: cast(lr),
            beta1: cast(0.9),
            beta2: cast(0.999),
            eps: cast(1e-8),
            t: 0,
            moments,
        }
    }

    fn step(&mut self, model: &mut CnnModel<S>, grads: &[Option<LayerGrads<S>>]) {
        self.t += 1;
        let knobs = (
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
            S::one() - self.beta1.powi(self.t),
            S::one() - self.beta2.powi(self.t),
        );
        for (layer, (slot, grad)) in model
            .layers_mut()
            .iter_mut()
            .zip(self.moments.iter_mut().zip(grads.iter()))
        {
            let (Some(m), Some(g)) = (slot, grad) else { continue };
            let (w, b) = match layer {
                Layer::Conv(c) => (&mut c.weights, &mut c.bias),
                Layer::Dense(d) => (&mut d.weights, &mut d.bias),
                _ => continue,
            };
            update(w, &g.dw, &mut m.mw, &mut m.vw, knobs);
            update(b, &g.db, &mut m.mb, &mut m.vb, knobs);
        }

        fn update<S: Scalar>(
            params: &mut [S],
            grads: &[S],
            m: &mut [S],
            v: &mut [S],
            (lr, beta1, beta2, eps, bc1, bc2): (S, S, S, S, S, S),
        ) {
            let one = S::one();
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = beta1 * m[i] + (one - beta1) * g;
                v[i] = beta2 * v[i] + (one - beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Train in place. Runs `cfg.epochs` epochs of shuffled mini-batches with
/// flip augmentation, writes `epoch-NNN.model` checkpoints into
/// `cfg.checkpoint_dir`, and reports per-epoch loss and training accuracy
/// (a separate inference pass, no flips or dropout). Aborts with
/// [`NnError::Divergence`] if an epoch's mean loss is not finite.
pub fn train(
    model: &mut CnnModel<f32>,
    tiles: &[LabeledTile],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>, NnError> {
    cfg.validate()?;
    if tiles.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let size = model.input_size() as usize;
    for t in tiles {
        if t.image.width() as usize != size {
            return Err(NnError::ShapeMismatch(format!(
                "tile is {}px, model wants {size}px",
                t.image.width()
            )));
        }
    }
    let classes: std::collections::BTreeSet<u8> = tiles.iter().map(|t| t.label).collect();
    if classes.len() < 2 {
        return Err(NnError::InvalidConfig(
            "training set must contain both classes".into(),
        ));
    }
    std::fs::create_dir_all(&cfg.checkpoint_dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model, cfg.learning_rate);
    let mut indices: Vec<usize> = (0..tiles.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    let sample_stride = 3 * size * size;

    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for chunk in indices.chunks(cfg.batch_size) {
            let mut batch = Tensor4::<f32>::zeros(chunk.len(), 3, size, size);
            let mut labels = Vec::with_capacity(chunk.len());
            for (slot, &idx) in chunk.iter().enumerate() {
                let (flip_h, flip_v) = if cfg.augment_flips {
                    (rng.gen::<bool>(), rng.gen::<bool>())
                } else {
                    (false, false)
                };
                fill_sample(
                    &mut batch.data_mut()[slot * sample_stride..(slot + 1) * sample_stride],
                    &tiles[idx].image,
                    size,
                    flip_h,
                    flip_v,
                );
                labels.push(tiles[idx].label);
            }
            let (probs, caches) = model.forward_trace(&batch, DropoutMode::Train(&mut rng))?;
            loss_sum += bce_loss(&probs, &labels) as f64 * chunk.len() as f64;
            let grads = model.backward(&caches, &bce_grad(&probs, &labels))?;
            adam.step(model, &grads);
        }
        let mean_loss = loss_sum / tiles.len() as f64;
        if !mean_loss.is_finite() {
            return Err(NnError::Divergence {
                epoch,
                loss: mean_loss,
            });
        }
        let train_accuracy = accuracy_pass(model, tiles, cfg.batch_size)?;
        let checkpoint = cfg.checkpoint_dir.join(format!("epoch-{epoch:03}.model"));
        save_model(model, &checkpoint)?;
        log::info!(
            "epoch {epoch}/{}: loss {mean_loss:.6}, train accuracy {train_accuracy:.4}",
            cfg.epochs
        );
        stats.push(EpochStats {
            epoch,
            mean_loss,
            train_accuracy,
            checkpoint,
        });
    }
    Ok(stats)
}

fn accuracy_pass(
    model: &CnnModel<f32>,
    tiles: &[LabeledTile],
    batch_size: usize,
) -> Result<f64, NnError> {
    let size = model.input_size() as usize;
    let mut correct = 0usize;
    for chunk in tiles.chunks(batch_size.max(1)) {
        let images: Vec<&RasterImage> = chunk.iter().map(|t| &t.image).collect();
        let batch = batch_tensor::<f32>(&images, size)?;
        let probs = model.predict(&batch)?;
        for (p, t) in probs.iter().zip(chunk.iter()) {
            let predicted = u8::from(*p >= 0.5);
            correct += usize::from(predicted == t.label);
        }
    }
    Ok(correct as f64 / tiles.len() as f64)
}

/// Result of [`gradient_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub params_checked: usize,
    pub max_rel_error: f64,
    pub mean_abs_grad: f64,
}

/// Compare analytic parameter gradients of the batch BCE loss against
/// central finite differences, perturbing every parameter by +/-h.
///
/// Relative error per parameter is `|analytic - fd| / max(|analytic|,
/// |fd|, 1e-12)`. Run this on an f64 model; f32 arithmetic is too coarse
/// for the comparison to be meaningful.
pub fn gradient_check(
    model: &mut CnnModel<f64>,
    batch: &Tensor4<f64>,
    labels: &[u8],
    h: f64,
) -> Result<GradCheckReport, NnError> {
    let (probs, caches) = model.forward_trace(batch, DropoutMode::Inference)?;
    let analytic = model.backward(&caches, &bce_grad(&probs, labels))?;

    let mut params_checked = 0usize;
    let mut max_rel_error = 0.0f64;
    let mut grad_abs_sum = 0.0f64;
    for (li, layer_grads) in analytic.iter().enumerate() {
        let Some(g) = layer_grads else { continue };
        let dw = g.dw.clone();
        let db = g.db.clone();
        for (which, grads) in [(0usize, dw), (1usize, db)] {
            for (pi, &a) in grads.iter().enumerate() {
                let read = |m: &mut CnnModel<f64>, v: f64| -> Result<f64, NnError> {
                    set_param(m, li, which, pi, v);
                    let p = m.forward(batch, DropoutMode::Inference)?;
                    Ok(bce_loss(&p, labels))
                };
                let orig = get_param(model, li, which, pi);
                let plus = read(model, orig + h)?;
                let minus = read(model, orig - h)?;
                set_param(model, li, which, pi, orig);
                let fd = (plus - minus) / (2.0 * h);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
                max_rel_error = max_rel_error.max(rel);
                grad_abs_sum += a.abs();
                params_checked += 1;
            }
        }
    }
    Ok(GradCheckReport {
        params_checked,
        max_rel_error,
        mean_abs_grad: grad_abs_sum / params_checked.max(1) as f64,
    })
}

fn param_vec(model: &mut CnnModel<f64>, layer: usize, which: usize) -> &mut Vec<f64> {
    match &mut model.layers_mut()[layer] {
        Layer::Conv(c) => {
            if which == 0 {
                &mut c.weights
            } else {
                &mut c.bias
            }
        }
        Layer::Dense(d) => {
            if which == 0 {
                &mut d.weights
            } else {
                &mut d.bias
            }
        }
        _ => unreachable!("gradients only exist for parameterized layers"),
    }
}

fn get_param(model: &mut CnnModel<f64>, layer: usize, which: usize, idx: usize) -> f64 {
    param_vec(model, layer, which)[idx]
}

fn set_param(model: &mut CnnModel<f64>, layer: usize, which: usize, idx: usize, v: f64) {
    param_vec(model, layer, which)[idx] = v;
}

/// Checkpoint filename for an epoch, as written by [`train`].
pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch-{epoch:03}.model")
}

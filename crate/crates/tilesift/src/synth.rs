//! Deterministic synthetic slides: two texture classes on a near-white
//! ground, sized for desk-scale training runs.
//!
//! Class 0 tissue is a smooth blob pattern, class 1 a high-frequency
//! stripe pattern, both in pink/purple stain-like hues. Background
//! pixels stay above 240 gray so threshold sifting drops pure
//! background tiles, and tissue carries per-pixel jitter so entropy
//! sifting separates it from background too. Output is a pure function
//! of the spec: same spec, same bytes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{write_labels, EvalError};
use crate::raster::{save_png, RasterError, RasterImage};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("slide dims must be at least 128x128, got {0}x{1}")]
    DimsTooSmall(u32, u32),
    #[error("class label must be 0 or 1, got {0}")]
    BadLabel(u8),
    #[error("tissue fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("need at least one slide per class")]
    EmptyCorpus,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Labels(#[from] EvalError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything that determines a synthetic slide's pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    width: u32,
    height: u32,
    class_label: u8,
    tissue_fraction: f64,
    seed: u64,
}

impl SynthSpec {
    pub fn new(
        width: u32,
        height: u32,
        class_label: u8,
        tissue_fraction: f64,
        seed: u64,
    ) -> Result<Self, SynthError> {
        if width < 128 || height < 128 {
            return Err(SynthError::DimsTooSmall(width, height));
        }
        if class_label > 1 {
            return Err(SynthError::BadLabel(class_label));
        }
        if !(tissue_fraction > 0.0 && tissue_fraction <= 1.0) {
            return Err(SynthError::BadFraction(tissue_fraction));
        }
        Ok(Self {
            width,
            height,
            class_label,
            tissue_fraction,
            seed,
        })
    }

    pub fn class_label(&self) -> u8 {
        self.class_label
    }
}

/// Smooth random field: uniform values on a coarse lattice, smoothstep
/// bilinear interpolation between them.
struct ValueNoise {
    cell: f64,
    cols: usize,
    grid: Vec<f64>,
}

impl ValueNoise {
    fn new(width: u32, height: u32, cell: u32, rng: &mut ChaCha8Rng) -> Self {
        let cols = (width / cell + 2) as usize;
        let rows = (height / cell + 2) as usize;
        let grid = (0..cols * rows).map(|_| rng.gen::<f64>()).collect();
        Self {
            cell: f64::from(cell),
            cols,
            grid,
        }
    }

    fn at(&self, x: u32, y: u32) -> f64 {
        let (fx, fy) = (f64::from(x) / self.cell, f64::from(y) / self.cell);
        let (cx, cy) = (fx.floor() as usize, fy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(fx.fract()), smooth(fy.fract()));
        let v = |gx: usize, gy: usize| self.grid[gy * self.cols + gx];
        let top = v(cx, cy) * (1.0 - tx) + v(cx + 1, cy) * tx;
        let bot = v(cx, cy + 1) * (1.0 - tx) + v(cx + 1, cy + 1) * tx;
        top * (1.0 - ty) + bot * ty
    }
}

fn lerp3(a: [u8; 3], b: [u8; 3], t: f64) -> [f64; 3] {
    [
        f64::from(a[0]) + (f64::from(b[0]) - f64::from(a[0])) * t,
        f64::from(a[1]) + (f64::from(b[1]) - f64::from(a[1])) * t,
        f64::from(a[2]) + (f64::from(b[2]) - f64::from(a[2])) * t,
    ]
}

const PINK: [u8; 3] = [235, 170, 200];
const PURPLE: [u8; 3] = [150, 90, 160];
const LIGHT_PINK: [u8; 3] = [240, 180, 210];
const BACKGROUND: [u8; 3] = [249, 247, 250];

/// Render one slide. Deterministic: the RNG is consumed in a fixed
/// order (mask lattice, texture lattice, then one jitter triple per
/// pixel in scan order, drawn whether or not the pixel is tissue).
pub fn generate_slide(spec: &SynthSpec) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mask_noise = ValueNoise::new(spec.width, spec.height, 96, &mut rng);
    let texture_noise = ValueNoise::new(spec.width, spec.height, 48, &mut rng);
    let stripe_angle = rng.gen_range(0.2..1.4f64);
    let stripe_period = rng.gen_range(5.0..9.0f64);

    // threshold the mask field at the quantile that leaves
    // tissue_fraction of pixels above it, sampled on a pixel subset
    let threshold = if spec.tissue_fraction >= 1.0 {
        f64::NEG_INFINITY
    } else {
        let mut sample = Vec::new();
        let step = 5;
        for y in (0..spec.height).step_by(step) {
            for x in (0..spec.width).step_by(step) {
                sample.push(mask_noise.at(x, y));
            }
        }
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((1.0 - spec.tissue_fraction) * sample.len() as f64) as usize;
        sample[idx.min(sample.len() - 1)]
    };

    let (sin_a, cos_a) = stripe_angle.sin_cos();
    RasterImage::from_rgb_fn(spec.width, spec.height, |x, y| {
        let jitter: [i16; 3] = [
            rng.gen_range(-8..=8),
            rng.gen_range(-8..=8),
            rng.gen_range(-8..=8),
        ];
        let (base, spread) = if mask_noise.at(x, y) >= threshold {
            let t = if spec.class_label == 0 {
                // slow blob gradient between the two stain hues
                texture_noise.at(x, y)
            } else {
                // hard stripes across a fixed direction
                let phase = (f64::from(x) * cos_a + f64::from(y) * sin_a) / stripe_period;
                let wobble = texture_noise.at(x, y) * 0.3;
                if (phase + wobble).fract() < 0.5 { 1.0 } else { 0.0 }
            };
            let palette_a = if spec.class_label == 0 { PINK } else { LIGHT_PINK };
            (lerp3(palette_a, PURPLE, t), 1.0)
        } else {
            (BACKGROUND.map(f64::from), 0.25)
        };
        [
            (base[0] + spread * f64::from(jitter[0])).clamp(0.0, 255.0) as u8,
            (base[1] + spread * f64::from(jitter[1])).clamp(0.0, 255.0) as u8,
            (base[2] + spread * f64::from(jitter[2])).clamp(0.0, 255.0) as u8,
        ]
    })
}

/// Write `2 * n_per_class` slides (`synA-###` class 0, `synB-###`
/// class 1) plus a `labels.csv` into `out_dir`; returns the labels.
pub fn generate_corpus(
    out_dir: impl AsRef<Path>,
    n_per_class: usize,
    width: u32,
    height: u32,
    seed: u64,
) -> Result<Vec<(String, u8)>, SynthError> {
    if n_per_class == 0 {
        return Err(SynthError::EmptyCorpus);
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut corpus_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for class in 0..2u8 {
        let prefix = if class == 0 { "synA" } else { "synB" };
        for i in 0..n_per_class {
            let id = format!("{prefix}-{i:03}");
            let slide_seed = corpus_rng.gen::<u64>();
            let fraction = corpus_rng.gen_range(0.45..0.75);
            let spec = SynthSpec::new(width, height, class, fraction, slide_seed)?;
            let img = generate_slide(&spec);
            save_png(&img, out_dir.join(format!("{id}.png")))?;
            labels.push((id, class));
        }
    }
    write_labels(&labels, out_dir.join("labels.csv"))?;
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::Histogram256;
    use crate::tiler::{tile_slide, SiftCriterion, TileGridSpec};

    #[test]
    fn spec_validation() {
        assert!(matches!(
            SynthSpec::new(100, 200, 0, 0.5, 0),
            Err(SynthError::DimsTooSmall(100, 200))
        ));
        assert!(matches!(
            SynthSpec::new(128, 128, 2, 0.5, 0),
            Err(SynthError::BadLabel(2))
        ));
        assert!(matches!(
            SynthSpec::new(128, 128, 0, 0.0, 0),
            Err(SynthError::BadFraction(_))
        ));
        assert!(SynthSpec::new(128, 128, 1, 1.0, 0).is_ok());
    }

    #[test]
    fn same_spec_means_same_bytes() {
        let spec = SynthSpec::new(160, 128, 1, 0.6, 42).unwrap();
        let a = generate_slide(&spec);
        let b = generate_slide(&spec);
        assert_eq!(a.pixels(), b.pixels());
        let other_seed = SynthSpec::new(160, 128, 1, 0.6, 43).unwrap();
        assert_ne!(generate_slide(&other_seed).pixels(), a.pixels());
        let other_class = SynthSpec::new(160, 128, 0, 0.6, 42).unwrap();
        assert_ne!(generate_slide(&other_class).pixels(), a.pixels());
    }

    #[test]
    fn full_tissue_passes_threshold_sifting_everywhere() {
        let spec = SynthSpec::new(256, 256, 1, 1.0, 3).unwrap();
        let img = generate_slide(&spec);
        let grid = TileGridSpec::new(64, 0.0).unwrap();
        let (_, summary) =
            tile_slide(&img, &grid, SiftCriterion::threshold_gray(), "s").unwrap();
        assert_eq!(summary.retained, summary.generated);
        assert_eq!(summary.retention_ratio(), 1.0);
    }

    #[test]
    fn half_tissue_retention_lands_in_the_expected_window() {
        let spec = SynthSpec::new(2000, 2000, 0, 0.5, 9).unwrap();
        let img = generate_slide(&spec);
        let grid = TileGridSpec::new(100, 0.0).unwrap();
        let (_, summary) =
            tile_slide(&img, &grid, SiftCriterion::threshold_gray(), "s").unwrap();
        let ratio = summary.retention_ratio();
        assert!(
            (0.35..=0.65).contains(&ratio),
            "retention {ratio} outside [0.35, 0.65]"
        );
    }

    #[test]
    fn background_reads_as_white_tissue_does_not() {
        // almost-pure background: nearly all pixels above the white cut
        let bg = generate_slide(&SynthSpec::new(256, 256, 0, 0.02, 5).unwrap());
        let hist = Histogram256::of_image(&bg).unwrap();
        assert!(hist.fraction_above(240) > 0.9);
        // pure tissue: nothing white, nothing black
        let tissue = generate_slide(&SynthSpec::new(256, 256, 0, 1.0, 5).unwrap());
        let hist = Histogram256::of_image(&tissue).unwrap();
        assert_eq!(hist.fraction_above(240), 0.0);
        assert_eq!(hist.fraction_below(15), 0.0);
    }

    #[test]
    fn entropy_sifting_separates_tissue_from_background() {
        let spec = SynthSpec::new(512, 512, 1, 0.5, 17).unwrap();
        let img = generate_slide(&spec);
        let grid = TileGridSpec::new(64, 0.0).unwrap();
        let (records, summary) =
            tile_slide(&img, &grid, SiftCriterion::Entropy, "s").unwrap();
        assert!(summary.retained > 0, "no tissue tile retained");
        assert!(summary.retained < summary.generated, "nothing sifted away");
        // retained tiles carry at least the whole-image entropy by rule
        let whole = crate::entropy::image_entropy(&img).unwrap().0;
        for r in records.iter().filter(|r| r.retained) {
            assert!(r.entropy_bits >= whole);
        }
    }

    #[test]
    fn corpus_layout_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let labels = generate_corpus(dir.path(), 3, 128, 128, 7).unwrap();
        assert_eq!(labels.len(), 6);
        let ids: Vec<&str> = labels.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(
            ids,
            ["synA-000", "synA-001", "synA-002", "synB-000", "synB-001", "synB-002"]
        );
        assert!(labels.iter().take(3).all(|(_, l)| *l == 0));
        assert!(labels.iter().skip(3).all(|(_, l)| *l == 1));
        for (id, _) in &labels {
            assert!(dir.path().join(format!("{id}.png")).exists());
        }
        let labels_a = std::fs::read(dir.path().join("labels.csv")).unwrap();
        let slide_a = std::fs::read(dir.path().join("synA-000.png")).unwrap();

        let dir2 = tempfile::tempdir().unwrap();
        generate_corpus(dir2.path(), 3, 128, 128, 7).unwrap();
        assert_eq!(
            std::fs::read(dir2.path().join("labels.csv")).unwrap(),
            labels_a
        );
        assert_eq!(
            std::fs::read(dir2.path().join("synA-000.png")).unwrap(),
            slide_a
        );
    }

    #[test]
    fn corpus_of_one_per_class_and_empty_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let labels = generate_corpus(dir.path(), 1, 128, 128, 0).unwrap();
        assert_eq!(labels.len(), 2);
        assert!(matches!(
            generate_corpus(dir.path(), 0, 128, 128, 0),
            Err(SynthError::EmptyCorpus)
        ));
    }
}

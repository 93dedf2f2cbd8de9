//! Per-pixel probability maps from overlapping tile classifications.
//!
//! Every retained tile deposits its probability onto all pixels it
//! covers; a pixel's value is the mean over the tiles containing it.
//! Rendering paints the map over the source image: red where the
//! predicted class's probability is at least 0.65, gold between 0.5 and
//! 0.65, and nothing below 0.5 or where no tile landed. A dense grid
//! (92% overlap by default) makes the colored regions contiguous.

use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::eval::{aggregate_slide, predict_tiles, EvalError, SlideResult};
use crate::nn::{CnnModel, NnError};
use crate::raster::{ColorMode, RasterError, RasterImage};
use crate::tiler::{tile_slide, SiftCriterion, TileGridSpec, TileSetSummary, TilerError};

/// Default map-time overlap fraction; at tile size 550 this gives a
/// 44-pixel stride.
pub const MAP_OVERLAP: f64 = 0.92;

#[derive(Debug, Error)]
pub enum ProbMapError {
    #[error("tile {size}x{size} at ({x}, {y}) exceeds the {width}x{height} accumulator")]
    OutOfBounds {
        x: u32,
        y: u32,
        size: u32,
        width: u32,
        height: u32,
    },
    #[error("probability {0} is not a finite value in [0, 1]")]
    BadProbability(f64),
    #[error("accumulator is {acc_w}x{acc_h} but base image is {img_w}x{img_h}")]
    DimensionMismatch {
        acc_w: u32,
        acc_h: u32,
        img_w: u32,
        img_h: u32,
    },
    #[error("bad color rule: {0}")]
    BadColorRule(String),
    #[error("model expects {model}px tiles but the grid produces {grid}px")]
    TileSizeMismatch { model: u32, grid: u32 },
    #[error("no tile survived sifting; nothing to map")]
    NoRetainedTiles,
    #[error(transparent)]
    Tiler(#[from] TilerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Running per-pixel probability sums and coverage counts.
///
/// Sums are kept in f64: map grids overlap heavily (tens to hundreds of
/// tiles per pixel) and f32 accumulation would drift.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbAccumulator {
    width: u32,
    height: u32,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl ProbAccumulator {
    pub fn new(width: u32, height: u32) -> Self {
        let len = width as usize * height as usize;
        Self {
            width,
            height,
            sum: vec![0.0; len],
            count: vec![0; len],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Add one tile's probability to every pixel of its square.
    pub fn accumulate(
        &mut self,
        x: u32,
        y: u32,
        size: u32,
        probability: f64,
    ) -> Result<(), ProbMapError> {
        if !probability.is_finite() || !(0.0..=1.0).contains(&probability) {
            return Err(ProbMapError::BadProbability(probability));
        }
        let (x1, y1) = (x as u64 + size as u64, y as u64 + size as u64);
        if x1 > self.width as u64 || y1 > self.height as u64 {
            return Err(ProbMapError::OutOfBounds {
                x,
                y,
                size,
                width: self.width,
                height: self.height,
            });
        }
        for row in y..y + size {
            let start = row as usize * self.width as usize + x as usize;
            for i in start..start + size as usize {
                self.sum[i] += probability;
                self.count[i] += 1;
            }
        }
        Ok(())
    }

    /// Mean probability at a pixel, `None` where no tile landed.
    pub fn mean(&self, x: u32, y: u32) -> Option<f64> {
        let i = y as usize * self.width as usize + x as usize;
        (self.count[i] > 0).then(|| self.sum[i] / f64::from(self.count[i]))
    }

    pub fn count_at(&self, x: u32, y: u32) -> u32 {
        self.count[y as usize * self.width as usize + x as usize]
    }

    /// Dump per-pixel means as `width: u32 LE, height: u32 LE`, then
    /// row-major f64 LE values with -1.0 where no tile landed.
    pub fn write_means(&self, path: impl AsRef<Path>) -> Result<(), ProbMapError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(&self.width.to_le_bytes())?;
        out.write_all(&self.height.to_le_bytes())?;
        for i in 0..self.sum.len() {
            let mean = if self.count[i] > 0 {
                self.sum[i] / f64::from(self.count[i])
            } else {
                -1.0
            };
            out.write_all(&mean.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Overlay thresholds and colors.
///
/// `class_of_interest` selects which class's probability is painted:
/// for class 0 the per-pixel mean is mirrored (q = 1 - m) so the same
/// thresholds apply to either side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorRule {
    pub class_of_interest: u8,
    pub high_cut: f64,
    pub boundary: f64,
    pub high_color: [u8; 3],
    pub moderate_color: [u8; 3],
    pub alpha: f64,
}

impl Default for ColorRule {
    fn default() -> Self {
        Self {
            class_of_interest: 1,
            high_cut: 0.65,
            boundary: 0.5,
            high_color: [255, 0, 0],
            moderate_color: [255, 200, 0],
            alpha: 0.45,
        }
    }
}

impl ColorRule {
    /// Default thresholds and palette for one class of interest.
    pub fn for_class(class_of_interest: u8) -> Self {
        Self {
            class_of_interest,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), ProbMapError> {
        if self.class_of_interest > 1 {
            return Err(ProbMapError::BadColorRule(format!(
                "class of interest must be 0 or 1, got {}",
                self.class_of_interest
            )));
        }
        if !(self.boundary < self.high_cut && self.high_cut <= 1.0) {
            return Err(ProbMapError::BadColorRule(format!(
                "need boundary < high_cut <= 1, got {} and {}",
                self.boundary, self.high_cut
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ProbMapError::BadColorRule(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

fn blend(alpha: f64, overlay: [u8; 3], base: [u8; 3]) -> [u8; 3] {
    let mix = |o: u8, b: u8| {
        (alpha * f64::from(o) + (1.0 - alpha) * f64::from(b)).round() as u8
    };
    [
        mix(overlay[0], base[0]),
        mix(overlay[1], base[1]),
        mix(overlay[2], base[2]),
    ]
}

/// Paint the accumulated means over the base image.
///
/// Pixels with no coverage, or whose class-of-interest probability is
/// below `boundary`, keep their base value.
pub fn render(
    acc: &ProbAccumulator,
    base: &RasterImage,
    rule: &ColorRule,
) -> Result<RasterImage, ProbMapError> {
    rule.validate()?;
    if acc.width != base.width() || acc.height != base.height() {
        return Err(ProbMapError::DimensionMismatch {
            acc_w: acc.width,
            acc_h: acc.height,
            img_w: base.width(),
            img_h: base.height(),
        });
    }
    let rgb;
    let base = if base.mode() == ColorMode::Rgb {
        base
    } else {
        rgb = base.to_rgb();
        &rgb
    };
    let out = RasterImage::from_rgb_fn(acc.width, acc.height, |x, y| {
        let px = [
            base.sample(x, y, 0),
            base.sample(x, y, 1),
            base.sample(x, y, 2),
        ];
        let Some(m) = acc.mean(x, y) else { return px };
        let q = if rule.class_of_interest == 1 { m } else { 1.0 - m };
        if q >= rule.high_cut {
            blend(rule.alpha, rule.high_color, px)
        } else if q >= rule.boundary {
            blend(rule.alpha, rule.moderate_color, px)
        } else {
            px
        }
    });
    Ok(out)
}

/// A finished slide map: the aggregate verdict, the rendered overlay,
/// the raw accumulator, and the tile census behind them.
#[derive(Debug)]
pub struct SlideMap {
    pub result: SlideResult,
    pub map: RasterImage,
    pub accumulator: ProbAccumulator,
    pub tiles: TileSetSummary,
}

/// Tile, sift, classify, accumulate, and render one slide.
///
/// Each retained tile is classified once on this grid. The class of
/// interest is the predicted slide label unless `class_override` pins it
/// (for figures against known ground truth).
pub fn map_slide(
    slide_id: &str,
    img: &RasterImage,
    model: &CnnModel<f32>,
    spec: &TileGridSpec,
    criterion: SiftCriterion,
    class_override: Option<u8>,
) -> Result<SlideMap, ProbMapError> {
    if model.input_size() != spec.tile_size() {
        return Err(ProbMapError::TileSizeMismatch {
            model: model.input_size(),
            grid: spec.tile_size(),
        });
    }
    let (records, summary) = tile_slide(img, spec, criterion, slide_id)?;
    if summary.retained == 0 {
        return Err(ProbMapError::NoRetainedTiles);
    }
    let preds = predict_tiles(model, img, &records, 32)?;
    let result = aggregate_slide(&preds)?;
    let mut acc = ProbAccumulator::new(img.width(), img.height());
    for p in &preds {
        acc.accumulate(p.x, p.y, p.size, p.probability())?;
    }
    let class = class_override.unwrap_or(result.label_by_mean);
    let map = render(&acc, img, &ColorRule::for_class(class))?;
    Ok(SlideMap {
        result,
        map,
        accumulator: acc,
        tiles: summary,
    })
}

//! Image decoding, grayscale conversion, and intermediate rescaling.
//!
//! Very large source images are brought down to a working size whose longer
//! dimension does not exceed a configurable limit (6000 px by default) before
//! any tiling happens. Rescaling never enlarges an image. Resampling is plain
//! bilinear and dimension rounding is `floor`, computed in exact integer
//! arithmetic so the limit is never exceeded and reruns are bit-identical.
//!
//! Grayscale conversion is fixed to BT.601 luma
//! (`0.299 R + 0.587 G + 0.114 B`, rounded half away from zero) so that
//! entropy values computed downstream are reproducible across platforms.

use std::path::Path;

use thiserror::Error;

/// Errors from decoding, encoding, and pixel-level operations.
#[derive(Debug, Error)]
pub enum RasterError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode image: {0}")]
    Decode(String),
    #[error("failed to encode image: {0}")]
    Encode(String),
    #[error("expected a {expected}-channel image, got {actual} channels")]
    ChannelMismatch { expected: u8, actual: u8 },
    #[error("pixel buffer of {len} bytes does not match {width}x{height}x{channels}")]
    BufferSize {
        len: usize,
        width: u32,
        height: u32,
        channels: u8,
    },
    #[error("region {x},{y} size {w}x{h} exceeds image bounds {width}x{height}")]
    OutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
}

/// Sample layout of a [`RasterImage`]: interleaved RGB or single-channel gray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    Gray,
    Rgb,
}

impl ColorMode {
    pub fn channels(self) -> u8 {
        match self {
            ColorMode::Gray => 1,
            ColorMode::Rgb => 3,
        }
    }
}

/// A decoded 8-bit image, row-major, channels interleaved.
///
/// This is the unit of slide-level work: everything downstream (entropy,
/// tiling, network input, probability maps) operates on these buffers.
/// Images are immutable after construction, so sharing one across threads
/// is safe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    mode: ColorMode,
    pixels: Vec<u8>,
}

impl RasterImage {
    /// Wrap an existing pixel buffer, validating its length.
    pub fn new(
        width: u32,
        height: u32,
        mode: ColorMode,
        pixels: Vec<u8>,
    ) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize * mode.channels() as usize;
        if pixels.len() != expected {
            return Err(RasterError::BufferSize {
                len: pixels.len(),
                width,
                height,
                channels: mode.channels(),
            });
        }
        Ok(Self {
            width,
            height,
            mode,
            pixels,
        })
    }

    /// A constant-valued image (every sample set to `value`).
    pub fn filled(width: u32, height: u32, mode: ColorMode, value: u8) -> Self {
        let len = width as usize * height as usize * mode.channels() as usize;
        Self {
            width,
            height,
            mode,
            pixels: vec![value; len],
        }
    }

    /// Build an RGB image from a per-pixel function.
    pub fn from_rgb_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            mode: ColorMode::Rgb,
            pixels,
        }
    }

    /// Build a grayscale image from a per-pixel function.
    pub fn from_gray_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            mode: ColorMode::Gray,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mode(&self) -> ColorMode {
        self.mode
    }

    pub fn channels(&self) -> u8 {
        self.mode.channels()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Sample at `(x, y)`, channel `c`. Panics if out of range.
    pub fn sample(&self, x: u32, y: u32, c: u8) -> u8 {
        let ch = self.channels() as usize;
        let idx = (y as usize * self.width as usize + x as usize) * ch + c as usize;
        self.pixels[idx]
    }

    /// Copy out the axis-aligned region at `(x, y)` of size `w`x`h`.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<RasterImage, RasterError> {
        if x.checked_add(w).is_none_or(|r| r > self.width)
            || y.checked_add(h).is_none_or(|b| b > self.height)
        {
            return Err(RasterError::OutOfBounds {
                x,
                y,
                w,
                h,
                width: self.width,
                height: self.height,
            });
        }
        let ch = self.channels() as usize;
        let row_bytes = w as usize * ch;
        let mut pixels = Vec::with_capacity(h as usize * row_bytes);
        for row in y..y + h {
            let start = (row as usize * self.width as usize + x as usize) * ch;
            pixels.extend_from_slice(&self.pixels[start..start + row_bytes]);
        }
        Ok(RasterImage {
            width: w,
            height: h,
            mode: self.mode,
            pixels,
        })
    }

    /// Mirror left-right.
    pub fn flipped_horizontal(&self) -> RasterImage {
        let ch = self.channels() as usize;
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                let start = (y as usize * self.width as usize + x as usize) * ch;
                pixels.extend_from_slice(&self.pixels[start..start + ch]);
            }
        }
        RasterImage {
            width: self.width,
            height: self.height,
            mode: self.mode,
            pixels,
        }
    }

    /// Mirror top-bottom.
    pub fn flipped_vertical(&self) -> RasterImage {
        let ch = self.channels() as usize;
        let row_bytes = self.width as usize * ch;
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for y in (0..self.height).rev() {
            let start = y as usize * row_bytes;
            pixels.extend_from_slice(&self.pixels[start..start + row_bytes]);
        }
        RasterImage {
            width: self.width,
            height: self.height,
            mode: self.mode,
            pixels,
        }
    }

    /// Replicate gray samples into three channels; RGB images are cloned.
    pub fn to_rgb(&self) -> RasterImage {
        match self.mode {
            ColorMode::Rgb => self.clone(),
            ColorMode::Gray => {
                let mut pixels = Vec::with_capacity(self.pixels.len() * 3);
                for &v in &self.pixels {
                    pixels.extend_from_slice(&[v, v, v]);
                }
                RasterImage {
                    width: self.width,
                    height: self.height,
                    mode: ColorMode::Rgb,
                    pixels,
                }
            }
        }
    }
}

/// How to bring an oversized image down to working size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RescalePolicy {
    /// Upper bound on the longer output dimension, in pixels.
    pub max_longer_dim: u32,
}

impl Default for RescalePolicy {
    fn default() -> Self {
        Self {
            max_longer_dim: 6000,
        }
    }
}

impl RescalePolicy {
    pub fn new(max_longer_dim: u32) -> Self {
        assert!(max_longer_dim >= 1, "max_longer_dim must be at least 1");
        Self { max_longer_dim }
    }
}

/// Decode a PNG, JPEG, or TIFF file into a 3-channel image.
///
/// Grayscale sources are expanded to three channels by sample replication;
/// alpha channels are dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage, RasterError> {
    let decoded = image::open(path.as_ref()).map_err(|e| match e {
        image::ImageError::IoError(io) => RasterError::Io(io),
        other => RasterError::Decode(other.to_string()),
    })?;
    let rgb = decoded.to_rgb8();
    let (width, height) = (rgb.width(), rgb.height());
    RasterImage::new(width, height, ColorMode::Rgb, rgb.into_raw())
}

/// Write an image as 8-bit non-interlaced PNG.
pub fn save_png(img: &RasterImage, path: impl AsRef<Path>) -> Result<(), RasterError> {
    let color = match img.mode {
        ColorMode::Gray => image::ExtendedColorType::L8,
        ColorMode::Rgb => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path.as_ref(),
        &img.pixels,
        img.width,
        img.height,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| match e {
        image::ImageError::IoError(io) => RasterError::Io(io),
        other => RasterError::Encode(other.to_string()),
    })
}

/// Output dimensions for [`rescale`]: unchanged when already within the
/// limit, otherwise `floor(dim * limit / longer)` per axis with a floor of
/// one pixel. Integer arithmetic, so the longer output dimension equals the
/// limit exactly.
pub fn rescaled_dims(width: u32, height: u32, max_longer_dim: u32) -> (u32, u32) {
    let longer = width.max(height);
    if longer <= max_longer_dim {
        return (width, height);
    }
    let scale_axis = |dim: u32| -> u32 {
        let scaled = dim as u64 * max_longer_dim as u64 / longer as u64;
        (scaled as u32).max(1)
    };
    (scale_axis(width), scale_axis(height))
}

/// Downscale so the longer dimension does not exceed the policy limit.
///
/// Images already within the limit are returned unchanged (never upscaled).
pub fn rescale(img: RasterImage, policy: &RescalePolicy) -> RasterImage {
    let (nw, nh) = rescaled_dims(img.width, img.height, policy.max_longer_dim);
    if (nw, nh) == (img.width, img.height) {
        return img;
    }
    resample_bilinear(&img, nw, nh)
}

fn resample_bilinear(img: &RasterImage, new_w: u32, new_h: u32) -> RasterImage {
    let ch = img.channels() as usize;
    let (w, h) = (img.width as usize, img.height as usize);
    let scale_x = w as f64 / new_w as f64;
    let scale_y = h as f64 / new_h as f64;
    let mut pixels = Vec::with_capacity(new_w as usize * new_h as usize * ch);
    for oy in 0..new_h as usize {
        let fy = ((oy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (fy as usize).min(h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let wy = fy - y0 as f64;
        for ox in 0..new_w as usize {
            let fx = ((ox as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (fx as usize).min(w - 1);
            let x1 = (x0 + 1).min(w - 1);
            let wx = fx - x0 as f64;
            for c in 0..ch {
                let p00 = img.pixels[(y0 * w + x0) * ch + c] as f64;
                let p01 = img.pixels[(y0 * w + x1) * ch + c] as f64;
                let p10 = img.pixels[(y1 * w + x0) * ch + c] as f64;
                let p11 = img.pixels[(y1 * w + x1) * ch + c] as f64;
                let top = p00 * (1.0 - wx) + p01 * wx;
                let bottom = p10 * (1.0 - wx) + p11 * wx;
                let value = top * (1.0 - wy) + bottom * wy;
                pixels.push(value.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage {
        width: new_w,
        height: new_h,
        mode: img.mode,
        pixels,
    }
}

/// BT.601 luma of one RGB triple, rounded half away from zero.
pub(crate) fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Convert a 3-channel image to single-channel BT.601 grayscale.
pub fn to_grayscale(img: &RasterImage) -> Result<RasterImage, RasterError> {
    if img.mode != ColorMode::Rgb {
        return Err(RasterError::ChannelMismatch {
            expected: 3,
            actual: img.channels(),
        });
    }
    let mut pixels = Vec::with_capacity(img.width as usize * img.height as usize);
    for rgb in img.pixels.chunks_exact(3) {
        pixels.push(luma(rgb[0], rgb[1], rgb[2]));
    }
    Ok(RasterImage {
        width: img.width,
        height: img.height,
        mode: ColorMode::Gray,
        pixels,
    })
}

//! 256-bin intensity histograms and Shannon image entropy.
//!
//! Entropy here is always the entropy of an image's grayscale intensity
//! histogram, in bits: `H = -sum p_k * log2(p_k)` where `p_k` is the fraction
//! of pixels with value `k`. It depends only on the histogram, so it is
//! invariant under pixel shuffling and does not scale with image size.
//! RGB input is reduced to BT.601 grayscale first, which keeps tile
//! entropies directly comparable with the whole-image entropy they are
//! sifted against.
//!
//! Each term is accumulated in double precision as
//! `(c/T) * (log2(T) - log2(c))`, taking log2 of the exact integers rather
//! than of the rounded ratio, which keeps the closed-form cases (0, 1, and
//! 8 bits) exact to well under 1e-12.

use thiserror::Error;

use crate::raster::{luma, ColorMode, RasterImage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntropyError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("expected a 1-channel image, got {actual} channels")]
    ChannelMismatch { actual: u8 },
    #[error("histogram has zero total count")]
    EmptyHistogram,
}

/// Counts of each 8-bit intensity value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    counts: [u64; 256],
    total: u64,
}

impl Histogram256 {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    /// Histogram of a single-channel image.
    pub fn of_gray(img: &RasterImage) -> Result<Self, EntropyError> {
        if img.mode() != ColorMode::Gray {
            return Err(EntropyError::ChannelMismatch {
                actual: img.channels(),
            });
        }
        if img.is_empty() {
            return Err(EntropyError::EmptyImage);
        }
        let mut counts = [0u64; 256];
        for &v in img.pixels() {
            counts[v as usize] += 1;
        }
        Ok(Self {
            counts,
            total: img.pixels().len() as u64,
        })
    }

    /// Histogram of any image's grayscale intensities; RGB pixels are
    /// reduced per-pixel with BT.601 luma, without materializing a
    /// grayscale copy.
    pub fn of_image(img: &RasterImage) -> Result<Self, EntropyError> {
        if img.is_empty() {
            return Err(EntropyError::EmptyImage);
        }
        match img.mode() {
            ColorMode::Gray => Self::of_gray(img),
            ColorMode::Rgb => {
                let mut counts = [0u64; 256];
                for rgb in img.pixels().chunks_exact(3) {
                    counts[luma(rgb[0], rgb[1], rgb[2]) as usize] += 1;
                }
                Ok(Self {
                    counts,
                    total: (img.pixels().len() / 3) as u64,
                })
            }
        }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Merge two histograms bin-wise.
    pub fn merged(&self, other: &Histogram256) -> Histogram256 {
        let mut counts = self.counts;
        for (c, o) in counts.iter_mut().zip(other.counts.iter()) {
            *c += o;
        }
        Histogram256 {
            counts,
            total: self.total + other.total,
        }
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Fraction of samples strictly greater than `cut`.
    pub fn fraction_above(&self, cut: u8) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n: u64 = self.counts[cut as usize + 1..].iter().sum();
        n as f64 / self.total as f64
    }

    /// Fraction of samples strictly less than `cut`.
    pub fn fraction_below(&self, cut: u8) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n: u64 = self.counts[..cut as usize].iter().sum();
        n as f64 / self.total as f64
    }
}

/// Entropy of an intensity histogram, in bits. For 8-bit single-channel
/// data this lies in [0, 8].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EntropyBits(pub f64);

impl std::fmt::Display for EntropyBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Histogram of a 1-channel image.
pub fn histogram(img: &RasterImage) -> Result<Histogram256, EntropyError> {
    Histogram256::of_gray(img)
}

/// `H = -sum p_k log2(p_k)` over nonzero bins.
pub fn shannon_entropy(h: &Histogram256) -> Result<EntropyBits, EntropyError> {
    if h.total == 0 {
        return Err(EntropyError::EmptyHistogram);
    }
    let total = h.total as f64;
    let log2_total = total.log2();
    let mut bits = 0.0f64;
    for &c in h.counts.iter() {
        if c > 0 {
            let count = c as f64;
            bits += (count / total) * (log2_total - count.log2());
        }
    }
    // guard against -0.0 from a single occupied bin
    Ok(EntropyBits(bits.max(0.0)))
}

/// Entropy of an image's grayscale histogram; RGB is reduced via BT.601.
pub fn image_entropy(img: &RasterImage) -> Result<EntropyBits, EntropyError> {
    shannon_entropy(&Histogram256::of_image(img)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // independent check: entropy straight from the definition, log2 of the
    // rounded ratio instead of the integer-log form used by the module
    fn entropy_by_definition(samples: &[u8]) -> f64 {
        let mut counts = [0u64; 256];
        for &s in samples {
            counts[s as usize] += 1;
        }
        let total = samples.len() as f64;
        -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total;
                p * p.log2()
            })
            .sum::<f64>()
    }

    fn gray(pixels: Vec<u8>, w: u32, h: u32) -> RasterImage {
        RasterImage::new(w, h, ColorMode::Gray, pixels).unwrap()
    }

    #[test]
    fn histogram_counts_directly() {
        let h = histogram(&gray(vec![0, 0, 255, 255], 2, 2)).unwrap();
        assert_eq!(h.counts()[0], 2);
        assert_eq!(h.counts()[255], 2);
        assert_eq!(h.total(), 4);
        assert_eq!(h.occupied_bins(), 2);

        let h = histogram(&gray(vec![128], 1, 1)).unwrap();
        assert_eq!(h.counts()[128], 1);
        assert_eq!(h.total(), 1);
    }

    #[test]
    fn histogram_of_full_value_cycle() {
        let img = RasterImage::from_gray_fn(16, 16, |x, y| (y * 16 + x) as u8);
        let h = histogram(&img).unwrap();
        // brute count of the same pixels
        let mut brute = [0u64; 256];
        for &v in img.pixels() {
            brute[v as usize] += 1;
        }
        assert_eq!(h.counts(), &brute);
        assert!(h.counts().iter().all(|&c| c == 1));
    }

    #[test]
    fn histogram_rejects_rgb_and_empty() {
        let rgb = RasterImage::filled(1, 1, ColorMode::Rgb, 0);
        assert_eq!(
            histogram(&rgb),
            Err(EntropyError::ChannelMismatch { actual: 3 })
        );
        let empty = RasterImage::new(0, 0, ColorMode::Gray, vec![]).unwrap();
        assert_eq!(histogram(&empty), Err(EntropyError::EmptyImage));
        assert_eq!(
            shannon_entropy(&Histogram256::from_counts([0; 256])),
            Err(EntropyError::EmptyHistogram)
        );
    }

    #[test]
    fn closed_form_entropies() {
        let constant = histogram(&RasterImage::filled(64, 64, ColorMode::Gray, 17)).unwrap();
        assert!(shannon_entropy(&constant).unwrap().0.abs() < 1e-12);

        let fifty_fifty = histogram(&gray(vec![0, 0, 255, 255], 2, 2)).unwrap();
        assert!((shannon_entropy(&fifty_fifty).unwrap().0 - 1.0).abs() < 1e-12);

        let uniform = RasterImage::from_gray_fn(16, 16, |x, y| (y * 16 + x) as u8);
        let h = histogram(&uniform).unwrap();
        assert!((shannon_entropy(&h).unwrap().0 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rgb_entropy_uses_grayscale_reduction() {
        // R==G==B everywhere: gray value equals the channel value
        let img = RasterImage::filled(8, 8, ColorMode::Rgb, 200);
        assert!(image_entropy(&img).unwrap().0.abs() < 1e-12);

        let checker = RasterImage::from_gray_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
        assert!((image_entropy(&checker).unwrap().0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_noise_entropy_matches_definition_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pixels: Vec<u8> = (0..100 * 100).map(|_| rng.gen()).collect();
        let img = gray(pixels.clone(), 100, 100);
        let h = image_entropy(&img).unwrap().0;
        let oracle = entropy_by_definition(&pixels);
        assert!((h - oracle).abs() < 1e-12, "{h} vs {oracle}");
        assert!((7.9..=8.0).contains(&h), "noise entropy {h}");
    }

    #[test]
    fn entropy_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pixels: Vec<u8> = (0..4096).map(|_| rng.gen_range(0..32)).collect();
        let reference = image_entropy(&gray(pixels.clone(), 64, 64)).unwrap().0;
        for _ in 0..50 {
            pixels.shuffle(&mut rng);
            let shuffled = image_entropy(&gray(pixels.clone(), 64, 64)).unwrap().0;
            // same histogram, same summation order: bitwise equal
            assert_eq!(shuffled.to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn entropy_does_not_scale_with_image_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let small: Vec<u8> = (0..32 * 32).map(|_| rng.gen()).collect();
        let h_small = image_entropy(&gray(small.clone(), 32, 32)).unwrap().0;
        // 2x2 replication: same histogram shape at 4x the count
        let img = gray(small, 32, 32);
        let doubled = RasterImage::from_gray_fn(64, 64, |x, y| img.sample(x % 32, y % 32, 0));
        let h_big = image_entropy(&doubled).unwrap().0;
        assert!((h_small - h_big).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounds_and_zero_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = rng.gen_range(1..500);
            let spread = rng.gen_range(1..=256) as u32;
            let pixels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..spread) as u8).collect();
            let h = histogram(&gray(pixels, n, 1)).unwrap();
            let bits = shannon_entropy(&h).unwrap().0;
            assert!((0.0..=8.0 + 1e-12).contains(&bits));
            assert_eq!(bits == 0.0, h.occupied_bins() == 1);
        }
    }

    #[test]
    fn merged_entropy_bounded_by_occupied_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let a: Vec<u8> = (0..rng.gen_range(1..300)).map(|_| rng.gen_range(0..64)).collect();
            let b: Vec<u8> = (0..rng.gen_range(1..300)).map(|_| rng.gen_range(32..128)).collect();
            let ha = histogram(&gray(a.clone(), a.len() as u32, 1)).unwrap();
            let hb = histogram(&gray(b.clone(), b.len() as u32, 1)).unwrap();
            let merged = ha.merged(&hb);
            let bits = shannon_entropy(&merged).unwrap().0;
            assert!(bits <= (merged.occupied_bins() as f64).log2() + 1e-12);
        }
    }

    #[test]
    fn fractions_use_strict_comparison() {
        let pixels = vec![240, 241, 255, 15, 14, 0, 100, 100];
        let h = histogram(&gray(pixels, 8, 1)).unwrap();
        // above 240: 241 and 255
        assert!((h.fraction_above(240) - 2.0 / 8.0).abs() < 1e-15);
        // below 15: 14 and 0
        assert!((h.fraction_below(15) - 2.0 / 8.0).abs() < 1e-15);
    }
}

//! Shannon entropy of grayscale histograms: closed forms and real
//! images.
//!
//! Run with: cargo run --release --example entropy_basics

use tilesift::entropy::{image_entropy, shannon_entropy, Histogram256};
use tilesift::raster::{ColorMode, RasterImage};
use tilesift::synth::{generate_slide, SynthSpec};

fn main() {
    // constant image: one occupied bin, zero bits
    let flat = RasterImage::filled(64, 64, ColorMode::Gray, 128);
    println!("constant image: {}", image_entropy(&flat).unwrap());

    // half black, half white: exactly one bit
    let split = RasterImage::from_gray_fn(64, 64, |x, _| if x < 32 { 0 } else { 255 });
    println!("50/50 split:    {}", image_entropy(&split).unwrap());

    // every gray level equally often: the 8-bit maximum
    let ramp = RasterImage::from_gray_fn(256, 256, |x, _| x as u8);
    println!("uniform ramp:   {}", image_entropy(&ramp).unwrap());

    // histograms can be built and merged without touching pixels again
    let h1 = Histogram256::of_image(&split).unwrap();
    let h2 = Histogram256::of_image(&flat).unwrap();
    let merged = h1.merged(&h2);
    println!("merged halves:  {}", shannon_entropy(&merged).unwrap());

    // tissue regions score higher than near-white background
    let slide = generate_slide(&SynthSpec::new(512, 512, 0, 0.5, 3).unwrap());
    println!("synthetic slide: {}", image_entropy(&slide).unwrap());
}

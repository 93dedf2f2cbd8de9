//! Cap a slide's longer dimension while preserving aspect ratio.
//!
//! Run with: cargo run --release --example rescale_slide

use std::path::PathBuf;

use tilesift::raster::{rescale, rescaled_dims, save_png, RescalePolicy};
use tilesift::synth::{generate_slide, SynthSpec};

fn main() {
    let out = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../target/example-output/rescale_slide");
    std::fs::create_dir_all(&out).expect("output dir");

    // an awkward aspect ratio shows the integer dimension arithmetic
    let spec = SynthSpec::new(1700, 900, 0, 0.7, 21).expect("spec");
    let slide = generate_slide(&spec);
    println!("source: {}x{}", slide.width(), slide.height());

    for cap in [6000u32, 800, 450] {
        let (w, h) = rescaled_dims(slide.width(), slide.height(), cap);
        let scaled = rescale(slide.clone(), &RescalePolicy::new(cap));
        assert_eq!((scaled.width(), scaled.height()), (w, h));
        let path = out.join(format!("cap_{cap}.png"));
        save_png(&scaled, &path).expect("save");
        println!("cap {cap}: {w}x{h} -> {}", path.display());
    }
    // a cap above the longer dimension never upscales
    let same = rescale(slide.clone(), &RescalePolicy::new(4000));
    assert_eq!(same.width(), slide.width());
    println!("cap 4000 leaves the 1700px slide untouched");
}

//! Build a per-pixel probability overlay from overlapping tiles.
//!
//! Run with: cargo run --release --example probability_map

use std::path::PathBuf;

use tilesift::probmap::{render, ColorRule, ProbAccumulator};
use tilesift::raster::save_png;
use tilesift::synth::{generate_slide, SynthSpec};

fn main() {
    let out = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../target/example-output/probability_map");
    std::fs::create_dir_all(&out).expect("output dir");

    let slide = generate_slide(&SynthSpec::new(512, 512, 1, 0.6, 2).unwrap());

    // a dense 64px grid over the left half votes "class 1, confidently";
    // the right half stays moderate, the margins uncovered
    let mut acc = ProbAccumulator::new(slide.width(), slide.height());
    for y in (32..416).step_by(16) {
        for x in (32..224).step_by(16) {
            acc.accumulate(x, y, 64, 0.92).unwrap();
        }
        for x in (224..416).step_by(16) {
            acc.accumulate(x, y, 64, 0.56).unwrap();
        }
    }
    println!(
        "pixel (100, 100) mean {:?}, coverage {}",
        acc.mean(100, 100),
        acc.count_at(100, 100)
    );

    let map = render(&acc, &slide, &ColorRule::default()).expect("render");
    let path = out.join("overlay.png");
    save_png(&map, &path).expect("save");
    println!("red-over-gold overlay written to {}", path.display());

    acc.write_means(out.join("means.bin")).expect("dump");
    println!("raw per-pixel means in {}", out.join("means.bin").display());
}

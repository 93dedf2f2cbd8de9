//! Decompose a slide into overlapping tiles and compare sifting
//! criteria.
//!
//! Run with: cargo run --release --example tile_and_sift

use std::path::PathBuf;

use tilesift::synth::{generate_slide, SynthSpec};
use tilesift::tiler::{export_manifest, tile_slide, SiftCriterion, TileGridSpec};

fn main() {
    let out = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../target/example-output/tile_and_sift");
    std::fs::create_dir_all(&out).expect("output dir");

    let slide = generate_slide(&SynthSpec::new(800, 600, 1, 0.5, 13).unwrap());
    let spec = TileGridSpec::new(100, 0.5).unwrap();
    println!(
        "grid: {}px tiles, {} overlap, stride {}",
        spec.tile_size(),
        spec.overlap_fraction(),
        spec.stride()
    );

    for criterion in [
        SiftCriterion::Entropy,
        SiftCriterion::threshold_gray(),
        SiftCriterion::Unsifted,
    ] {
        let (records, summary) = tile_slide(&slide, &spec, criterion, "demo").unwrap();
        println!(
            "{criterion}: retained {}/{} (ratio {:.4})",
            summary.retained,
            summary.generated,
            summary.retention_ratio()
        );
        let path = out.join(format!("manifest_{criterion}.csv").replace(':', "_"));
        export_manifest(&records, &path).unwrap();
    }
    println!("manifests in {}", out.display());
}

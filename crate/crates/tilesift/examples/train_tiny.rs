//! Train the tile classifier on a handful of synthetic tiles.
//!
//! Run with: cargo run --release --example train_tiny

use std::path::PathBuf;

use tilesift::nn::{build_reference_model, train, LabeledTile, TrainConfig};
use tilesift::synth::{generate_slide, SynthSpec};
use tilesift::tiler::{tile_slide, SiftCriterion, TileGridSpec};

fn main() {
    let out = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../target/example-output/train_tiny");

    // cut 32px tiles from one slide of each class
    let grid = TileGridSpec::new(32, 0.0).unwrap();
    let mut tiles = Vec::new();
    for class in [0u8, 1] {
        let slide = generate_slide(&SynthSpec::new(128, 128, class, 1.0, 5).unwrap());
        let (records, _) = tile_slide(&slide, &grid, SiftCriterion::Unsifted, "demo").unwrap();
        for r in &records {
            let crop = slide.crop(r.x, r.y, r.size, r.size).unwrap();
            tiles.push(LabeledTile::new(crop, class).unwrap());
        }
    }
    println!("training on {} tiles", tiles.len());

    let mut model = build_reference_model::<f32>(32, 1).expect("model");
    let mut cfg = TrainConfig::new(out.join("checkpoints"));
    cfg.epochs = 6;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.seed = 1;
    let stats = train(&mut model, &tiles, &cfg).expect("training");
    for s in &stats {
        println!(
            "epoch {}: loss {:.6}, train accuracy {:.4} -> {}",
            s.epoch,
            s.mean_loss,
            s.train_accuracy,
            s.checkpoint.display()
        );
    }
}

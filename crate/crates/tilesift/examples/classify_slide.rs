//! End-to-end single-slide classification: tile, sift, predict,
//! aggregate, and render the probability overlay.
//!
//! Run with: cargo run --release --example classify_slide

use std::path::PathBuf;

use tilesift::eval::{aggregate_slide, predict_tiles};
use tilesift::nn::{build_reference_model, train, LabeledTile, TrainConfig};
use tilesift::probmap::map_slide;
use tilesift::raster::save_png;
use tilesift::synth::{generate_slide, SynthSpec};
use tilesift::tiler::{tile_slide, SiftCriterion, TileGridSpec};

fn main() {
    let out = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../target/example-output/classify_slide");
    std::fs::create_dir_all(&out).expect("output dir");

    // fit a quick model on pure-texture tiles of both classes
    let grid = TileGridSpec::new(32, 0.0).unwrap();
    let mut tiles = Vec::new();
    for class in [0u8, 1] {
        let slide = generate_slide(&SynthSpec::new(160, 160, class, 1.0, 40 + u64::from(class)).unwrap());
        let (records, _) = tile_slide(&slide, &grid, SiftCriterion::Unsifted, "fit").unwrap();
        for r in &records {
            tiles.push(LabeledTile::new(slide.crop(r.x, r.y, r.size, r.size).unwrap(), class).unwrap());
        }
    }
    let mut model = build_reference_model::<f32>(32, 9).expect("model");
    let mut cfg = TrainConfig::new(out.join("checkpoints"));
    cfg.epochs = 6;
    cfg.batch_size = 10;
    cfg.learning_rate = 2e-3;
    cfg.seed = 9;
    let stats = train(&mut model, &tiles, &cfg).expect("training");
    println!(
        "trained to {:.0}% tile accuracy in {} epochs",
        100.0 * stats.last().unwrap().train_accuracy,
        stats.len()
    );

    // classify an unseen mixed slide tile by tile
    let unseen = generate_slide(&SynthSpec::new(256, 256, 1, 0.7, 99).unwrap());
    let (records, summary) =
        tile_slide(&unseen, &grid, SiftCriterion::Entropy, "unseen").unwrap();
    println!(
        "unseen slide: {}/{} tiles retained",
        summary.retained, summary.generated
    );
    let preds = predict_tiles(&model, &unseen, &records, 16).expect("prediction");
    let verdict = aggregate_slide(&preds).expect("aggregation");
    println!(
        "verdict: class {} (mean probability {:.3} over {} tiles)",
        verdict.label_by_mean, verdict.mean_probability, verdict.tile_count
    );

    // the probability map repeats that pass on a dense grid
    let dense = TileGridSpec::new(32, 0.75).unwrap();
    let map = map_slide("unseen", &unseen, &model, &dense, SiftCriterion::Entropy, None)
        .expect("map");
    save_png(&map.map, out.join("unseen_map.png")).expect("save");
    println!("overlay written to {}", out.join("unseen_map.png").display());
}

//! Entropy-sifted tile classification for very large images.
//!
//! The pipeline: rescale an oversized image to a working size, decompose it
//! into overlapping square tiles, discard low-information tiles by image
//! entropy or near-white/near-black thresholds, train a compact
//! convolutional network on the survivors, aggregate tile probabilities
//! into per-image labels, and render per-pixel probability maps from
//! densely overlapping classified tiles.
//!
//! Every stage is deterministic under a fixed seed: reruns produce
//! byte-identical manifests, checkpoints, and rendered maps.
//!
//! See the `examples/` directory for one runnable program per stage; the
//! `tilesift` binary chains the same stages behind subcommands.

pub mod cli;
pub mod entropy;
pub mod eval;
pub mod nn;
pub mod probmap;
pub mod raster;
pub mod synth;
pub mod tiler;

pub use entropy::{image_entropy, shannon_entropy, EntropyBits, Histogram256};
pub use eval::{
    aggregate_slide, evaluate, make_partitions, predict_tiles, EvalReport, Partition,
    SlideResult, TilePrediction,
};
pub use probmap::{map_slide, render, ColorRule, ProbAccumulator, SlideMap, MAP_OVERLAP};
pub use synth::{generate_corpus, generate_slide, SynthSpec};
pub use raster::{load_image, rescale, save_png, to_grayscale, ColorMode, RasterImage, RescalePolicy};
pub use tiler::{grid_origins, tile_slide, SiftCriterion, TileGridSpec, TileRecord, TileSetSummary};

//! Subcommand drivers behind the `tilesift` binary.
//!
//! Every subcommand resolves its settings from defaults, then an
//! optional TOML config file, then flags (flags win), and records the
//! result as `run.json` in its output directory. Exit codes: 0 success,
//! 1 runtime failure, 2 usage error (bad flags, bad config, no inputs).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate, predict_tiles, read_labels, EvalError, SlideResult};
use crate::nn::{
    build_reference_model, load_model, train, CnnModel, LabeledTile, NnError, TrainConfig,
};
use crate::probmap::{map_slide, ProbMapError, MAP_OVERLAP};
use crate::raster::{load_image, rescale, save_png, RasterError, RasterImage, RescalePolicy};
use crate::synth::{generate_corpus, SynthError};
use crate::tiler::{
    export_manifest, import_manifest, tile_slide, SiftCriterion, TileGridSpec, TileRecord,
    TilerError,
};

#[derive(Debug, Error)]
pub enum CliError {
    /// Caller mistake: exits 2.
    #[error("{0}")]
    Usage(String),
    /// Pipeline failure: exits 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

macro_rules! runtime_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}
runtime_from!(RasterError, TilerError, NnError, EvalError, ProbMapError, SynthError);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

/// Settings shared across subcommands. TOML keys match field names;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub max_longer_dim: u32,
    pub tile_size: u32,
    pub overlap_fraction: f64,
    pub criterion: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub augment_flips: bool,
    pub seed: u64,
    /// 0 means all available cores.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_longer_dim: 6000,
            tile_size: 100,
            overlap_fraction: 0.5,
            criterion: "entropy".into(),
            epochs: 35,
            batch_size: 16,
            learning_rate: 1e-3,
            augment_flips: true,
            seed: 0,
            threads: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    fn parsed_criterion(&self) -> Result<SiftCriterion, CliError> {
        self.criterion.parse().map_err(CliError::Usage)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tilesift",
    version,
    about = "Slide classification pipeline: rescale, tile, sift, train, evaluate, map"
)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Thread ceiling for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RescaleArgs {
    /// Directory of source images (png/jpeg/tiff).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cap on the longer output dimension.
    #[arg(long)]
    pub max_dim: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TileArgs {
    /// Directory of rescaled slide images.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Tile side in pixels.
    #[arg(long)]
    pub size: Option<u32>,
    /// Fraction of a tile shared with its neighbor, in [0, 1).
    #[arg(long)]
    pub overlap: Option<f64>,
    /// entropy | threshold_gray[:WHITE:BLACK] | unsifted
    #[arg(long)]
    pub criterion: Option<String>,
    /// Also write each retained tile as a PNG under out/tiles/.
    #[arg(long)]
    pub dump_tiles: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Tile manifest produced by `tile`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding the slide images the manifest refers to.
    #[arg(long)]
    pub images: PathBuf,
    /// labels.csv with slide_id,label rows.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional file of slide ids (one per line) to train on.
    #[arg(long)]
    pub slides: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable the random flip augmentation.
    #[arg(long)]
    pub no_flips: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of .model checkpoints (every one is scored).
    #[arg(long)]
    pub checkpoints: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional file of slide ids (one per line) to evaluate.
    #[arg(long)]
    pub slides: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// One .model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// One rescaled slide image.
    #[arg(long)]
    pub slide: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Map-grid overlap fraction (dense by default).
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub criterion: Option<String>,
    /// Pin the colored class instead of using the predicted one.
    #[arg(long)]
    pub truth_class: Option<u8>,
    /// Also dump raw per-pixel means as <slide>_means.bin.
    #[arg(long)]
    pub dump_means: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 512)]
    pub width: u32,
    #[arg(long, default_value_t = 512)]
    pub height: u32,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shrink images so the longer dimension fits a cap.
    Rescale(RescaleArgs),
    /// Cut slides into overlapping tiles and sift them.
    Tile(TileArgs),
    /// Train the tile classifier, one checkpoint per epoch.
    Train(TrainArgs),
    /// Score every checkpoint against a labeled test set.
    Eval(EvalArgs),
    /// Label slides with one model, no ground truth needed.
    Classify(ClassifyArgs),
    /// Render a per-pixel probability overlay for one slide.
    Map(MapArgs),
    /// Generate a labeled synthetic corpus.
    Synth(SynthArgs),
}

/// What `run.json` records: the subcommand, the resolved settings, and
/// the paths it read and wrote.
#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    config: &'a PipelineConfig,
    inputs: BTreeMap<&'a str, String>,
    out: String,
}

fn write_run_record(
    out_dir: &Path,
    command: &str,
    config: &PipelineConfig,
    inputs: &[(&str, &Path)],
) -> Result<(), CliError> {
    let record = RunRecord {
        command,
        config,
        inputs: inputs
            .iter()
            .map(|(k, p)| (*k, p.display().to_string()))
            .collect(),
        out: out_dir.display().to_string(),
    };
    let mut text = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(out_dir.join("run.json"), text)?;
    Ok(())
}

/// Top-level dispatch. Applies the thread ceiling, then runs the
/// subcommand.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if config.threads > 0 {
        // a second build_global in one process is harmless for tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global();
    }
    match cli.command {
        Command::Rescale(args) => cmd_rescale(args, config),
        Command::Tile(args) => cmd_tile(args, config),
        Command::Train(args) => cmd_train(args, config),
        Command::Eval(args) => cmd_eval(args, config),
        Command::Classify(args) => cmd_classify(args, config),
        Command::Map(args) => cmd_map(args, config),
        Command::Synth(args) => cmd_synth(args, config),
    }
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "tif", "tiff"];

/// Image files in a directory, sorted by name for reproducible order.
fn list_image_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_lowercase().as_str()))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no inputs: {} contains no image files",
            dir.display()
        )));
    }
    Ok(files)
}

fn slide_id_of(path: &Path) -> Result<String, CliError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Usage(format!("cannot name slide from {}", path.display())))
}

fn cmd_rescale(args: RescaleArgs, mut config: PipelineConfig) -> Result<(), CliError> {
    if let Some(dim) = args.max_dim {
        config.max_longer_dim = dim;
    }
    let policy = RescalePolicy::new(config.max_longer_dim);
    let files = list_image_files(&args.input)?;
    std::fs::create_dir_all(&args.out)?;
    for path in &files {
        let img = load_image(path)?;
        let (w0, h0) = (img.width(), img.height());
        let scaled = rescale(img, &policy);
        let out_path = args.out.join(format!("{}.png", slide_id_of(path)?));
        save_png(&scaled, &out_path)?;
        log::info!(
            "rescaled {} {}x{} -> {}x{}",
            path.display(),
            w0,
            h0,
            scaled.width(),
            scaled.height()
        );
    }
    write_run_record(&args.out, "rescale", &config, &[("input", &args.input)])?;
    println!("rescaled {} images into {}", files.len(), args.out.display());
    Ok(())
}

fn cmd_tile(args: TileArgs, mut config: PipelineConfig) -> Result<(), CliError> {
    if let Some(size) = args.size {
        config.tile_size = size;
    }
    if let Some(overlap) = args.overlap {
        config.overlap_fraction = overlap;
    }
    if let Some(criterion) = args.criterion {
        config.criterion = criterion;
    }
    let criterion = config.parsed_criterion()?;
    let spec = TileGridSpec::new(config.tile_size, config.overlap_fraction)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let files = list_image_files(&args.input)?;
    std::fs::create_dir_all(&args.out)?;
    let mut all_records = Vec::new();
    let (mut generated, mut retained) = (0usize, 0usize);
    for path in &files {
        let id = slide_id_of(path)?;
        let img = load_image(path)?;
        let (records, summary) = tile_slide(&img, &spec, criterion, &id)?;
        log::info!(
            "{id}: generated {} retained {} (ratio {:.4})",
            summary.generated,
            summary.retained,
            summary.retention_ratio()
        );
        if args.dump_tiles {
            let tile_dir = args.out.join("tiles").join(&id);
            std::fs::create_dir_all(&tile_dir)?;
            for r in records.iter().filter(|r| r.retained) {
                let crop = img.crop(r.x, r.y, r.size, r.size)?;
                save_png(&crop, tile_dir.join(format!("{}_{}.png", r.x, r.y)))?;
            }
        }
        generated += summary.generated;
        retained += summary.retained;
        all_records.extend(records);
    }
    export_manifest(&all_records, args.out.join("manifest.csv"))?;
    write_run_record(&args.out, "tile", &config, &[("input", &args.input)])?;
    println!(
        "tiled {} slides: generated {generated} retained {retained} (ratio {:.4})",
        files.len(),
        retained as f64 / generated as f64
    );
    Ok(())
}

/// Manifest records grouped by slide, retained rows only.
fn retained_by_slide(records: &[TileRecord]) -> BTreeMap<String, Vec<TileRecord>> {
    let mut by_slide: BTreeMap<String, Vec<TileRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.retained) {
        by_slide.entry(r.slide_id.clone()).or_default().push(r.clone());
    }
    by_slide
}

fn read_slide_filter(path: Option<&Path>) -> Result<Option<Vec<String>>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(Some(
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect(),
    ))
}

fn apply_filter(
    by_slide: BTreeMap<String, Vec<TileRecord>>,
    filter: Option<&[String]>,
) -> BTreeMap<String, Vec<TileRecord>> {
    match filter {
        None => by_slide,
        Some(keep) => by_slide
            .into_iter()
            .filter(|(id, _)| keep.contains(id))
            .collect(),
    }
}

/// The one tile side used by every retained record, or an error.
fn uniform_tile_size(by_slide: &BTreeMap<String, Vec<TileRecord>>) -> Result<u32, CliError> {
    let mut sizes = by_slide.values().flatten().map(|r| r.size);
    let first = sizes
        .next()
        .ok_or_else(|| CliError::Usage("no inputs: manifest has no retained tiles".into()))?;
    if let Some(other) = sizes.find(|s| *s != first) {
        return Err(CliError::Runtime(format!(
            "manifest mixes tile sizes {first} and {other}"
        )));
    }
    Ok(first)
}

fn slide_image(images: &Path, slide_id: &str) -> Result<RasterImage, CliError> {
    let path = images.join(format!("{slide_id}.png"));
    if !path.exists() {
        return Err(CliError::Runtime(format!(
            "manifest names slide {slide_id:?} but {} does not exist",
            path.display()
        )));
    }
    Ok(load_image(&path)?)
}

#[derive(Debug, Serialize)]
struct EpochLogEntry {
    epoch: usize,
    mean_loss: f64,
    train_accuracy: f64,
    checkpoint: String,
}

fn cmd_train(args: TrainArgs, mut config: PipelineConfig) -> Result<(), CliError> {
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        config.batch_size = batch;
    }
    if let Some(lr) = args.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.no_flips {
        config.augment_flips = false;
    }
    let records = import_manifest(&args.manifest)?;
    let filter = read_slide_filter(args.slides.as_deref())?;
    let by_slide = apply_filter(retained_by_slide(&records), filter.as_deref());
    let tile_size = uniform_tile_size(&by_slide)?;
    config.tile_size = tile_size;

    let labels: BTreeMap<String, u8> = read_labels(&args.labels)?.into_iter().collect();
    let mut tiles = Vec::new();
    for (id, slide_records) in &by_slide {
        let label = *labels
            .get(id)
            .ok_or_else(|| CliError::Runtime(format!("no label for slide {id:?}")))?;
        let img = slide_image(&args.images, id)?;
        for r in slide_records {
            let crop = img.crop(r.x, r.y, r.size, r.size)?.to_rgb();
            tiles.push(LabeledTile::new(crop, label)?);
        }
    }
    log::info!(
        "training on {} tiles from {} slides at {tile_size}px",
        tiles.len(),
        by_slide.len()
    );

    std::fs::create_dir_all(&args.out)?;
    let mut model = build_reference_model::<f32>(tile_size, config.seed)?;
    let mut train_cfg = TrainConfig::new(args.out.join("checkpoints"));
    train_cfg.epochs = config.epochs;
    train_cfg.batch_size = config.batch_size;
    train_cfg.learning_rate = config.learning_rate;
    train_cfg.augment_flips = config.augment_flips;
    train_cfg.seed = config.seed;
    let stats = train(&mut model, &tiles, &train_cfg)?;

    let log_entries: Vec<EpochLogEntry> = stats
        .iter()
        .map(|s| EpochLogEntry {
            epoch: s.epoch,
            mean_loss: s.mean_loss,
            train_accuracy: s.train_accuracy,
            checkpoint: s.checkpoint.display().to_string(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&log_entries)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(args.out.join("training_log.json"), text)?;
    write_run_record(
        &args.out,
        "train",
        &config,
        &[
            ("manifest", &args.manifest),
            ("images", &args.images),
            ("labels", &args.labels),
        ],
    )?;
    let last = stats.last().expect("at least one epoch");
    println!(
        "trained {} epochs: final loss {:.6}, train accuracy {:.4}",
        stats.len(),
        last.mean_loss,
        last.train_accuracy
    );
    Ok(())
}

/// Tile predictions for every slide present in `by_slide`, using images
/// from `images/<slide_id>.png`. Slide images load once and are reused
/// across checkpoints by the caller.
fn predictions_for(
    model: &CnnModel<f32>,
    images: &BTreeMap<String, RasterImage>,
    by_slide: &BTreeMap<String, Vec<TileRecord>>,
) -> Result<Vec<crate::eval::TilePrediction>, CliError> {
    let mut preds = Vec::new();
    for (id, records) in by_slide {
        preds.extend(predict_tiles(model, &images[id], records, 32)?);
    }
    Ok(preds)
}

fn load_model_at(path: &Path) -> Result<CnnModel<f32>, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "model file {} does not exist",
            path.display()
        )));
    }
    Ok(load_model(path)?)
}

fn model_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "model"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no inputs: {} contains no .model files",
            dir.display()
        )));
    }
    Ok(files)
}

fn cmd_eval(args: EvalArgs, config: PipelineConfig) -> Result<(), CliError> {
    let records = import_manifest(&args.manifest)?;
    let filter = read_slide_filter(args.slides.as_deref())?;
    let by_slide = apply_filter(retained_by_slide(&records), filter.as_deref());
    if by_slide.is_empty() {
        return Err(CliError::Usage("no inputs: no slides to evaluate".into()));
    }
    let labels = read_labels(&args.labels)?;
    let truth: Vec<(String, u8)> = match &filter {
        None => labels,
        Some(keep) => labels
            .into_iter()
            .filter(|(id, _)| keep.contains(id))
            .collect(),
    };
    let mut images = BTreeMap::new();
    for id in by_slide.keys() {
        images.insert(id.clone(), slide_image(&args.images, id)?);
    }
    let checkpoints = model_files(&args.checkpoints)?;
    std::fs::create_dir_all(&args.out)?;
    let mut best: Option<(String, f64)> = None;
    for path in &checkpoints {
        let model = load_model(path)?;
        let preds = predictions_for(&model, &images, &by_slide)?;
        let report = evaluate(&preds, &truth)?;
        let stem = slide_id_of(path)?;
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(args.out.join(format!("eval-{stem}.json")), text)?;
        log::info!(
            "{stem}: accuracy {:.4} margin {:.4} variance {:.6}",
            report.accuracy,
            report.margin,
            report.mean_tile_variance
        );
        if best.as_ref().is_none_or(|(_, acc)| report.accuracy > *acc) {
            best = Some((stem, report.accuracy));
        }
    }
    write_run_record(
        &args.out,
        "eval",
        &config,
        &[
            ("checkpoints", &args.checkpoints),
            ("manifest", &args.manifest),
            ("images", &args.images),
            ("labels", &args.labels),
        ],
    )?;
    let (name, accuracy) = best.expect("at least one checkpoint");
    println!("best checkpoint {name}: accuracy {accuracy:.4}");
    Ok(())
}

fn cmd_classify(args: ClassifyArgs, config: PipelineConfig) -> Result<(), CliError> {
    let records = import_manifest(&args.manifest)?;
    let by_slide = retained_by_slide(&records);
    if by_slide.is_empty() {
        return Err(CliError::Usage("no inputs: manifest has no retained tiles".into()));
    }
    let model = load_model_at(&args.model)?;
    std::fs::create_dir_all(&args.out)?;
    let mut results: Vec<SlideResult> = Vec::with_capacity(by_slide.len());
    for (id, slide_records) in &by_slide {
        let img = slide_image(&args.images, id)?;
        let preds = predict_tiles(&model, &img, slide_records, 32)?;
        let result = crate::eval::aggregate_slide(&preds)?;
        println!(
            "{id}: class {} (mean probability {:.4}, {} tiles)",
            result.label_by_mean, result.mean_probability, result.tile_count
        );
        results.push(result);
    }
    let mut text = serde_json::to_string_pretty(&results)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(args.out.join("slide_results.json"), text)?;
    write_run_record(
        &args.out,
        "classify",
        &config,
        &[
            ("model", &args.model),
            ("manifest", &args.manifest),
            ("images", &args.images),
        ],
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct MapSidecar {
    slide_id: String,
    class_of_interest: u8,
    result: SlideResult,
    tiles_generated: usize,
    tiles_retained: usize,
}

fn cmd_map(args: MapArgs, mut config: PipelineConfig) -> Result<(), CliError> {
    config.overlap_fraction = args.overlap.unwrap_or(MAP_OVERLAP);
    if let Some(criterion) = args.criterion {
        config.criterion = criterion;
    }
    if let Some(class) = args.truth_class {
        if class > 1 {
            return Err(CliError::Usage(format!(
                "truth class must be 0 or 1, got {class}"
            )));
        }
    }
    let criterion = config.parsed_criterion()?;
    if !args.slide.exists() {
        return Err(CliError::Usage(format!(
            "slide {} does not exist",
            args.slide.display()
        )));
    }
    let model = load_model_at(&args.model)?;
    config.tile_size = model.input_size();
    let spec = TileGridSpec::new(model.input_size(), config.overlap_fraction)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let id = slide_id_of(&args.slide)?;
    let img = load_image(&args.slide)?;
    let map = map_slide(&id, &img, &model, &spec, criterion, args.truth_class)?;
    std::fs::create_dir_all(&args.out)?;
    save_png(&map.map, args.out.join(format!("{id}_map.png")))?;
    if args.dump_means {
        map.accumulator
            .write_means(args.out.join(format!("{id}_means.bin")))?;
    }
    let class = args.truth_class.unwrap_or(map.result.label_by_mean);
    let sidecar = MapSidecar {
        slide_id: id.clone(),
        class_of_interest: class,
        result: map.result,
        tiles_generated: map.tiles.generated,
        tiles_retained: map.tiles.retained,
    };
    let mut text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(args.out.join(format!("{id}_map.json")), text)?;
    write_run_record(
        &args.out,
        "map",
        &config,
        &[("slide", &args.slide), ("model", &args.model)],
    )?;
    println!(
        "mapped {id}: class {class}, {} of {} tiles retained",
        sidecar.tiles_retained, sidecar.tiles_generated
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs, mut config: PipelineConfig) -> Result<(), CliError> {
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.width < 128 || args.height < 128 {
        return Err(CliError::Usage(format!(
            "slide dims must be at least 128x128, got {}x{}",
            args.width, args.height
        )));
    }
    let labels = generate_corpus(&args.out, args.n_per_class, args.width, args.height, config.seed)?;
    write_run_record(&args.out, "synth", &config, &[])?;
    println!(
        "generated {} slides ({} per class) into {}",
        labels.len(),
        args.n_per_class,
        args.out.display()
    );
    Ok(())
}

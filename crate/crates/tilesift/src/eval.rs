//! Tile-to-image aggregation, accuracy/margin/variance reporting, and
//! cross-validation partitioning.
//!
//! A slide's tiles each carry one probability; the slide is labeled two
//! ways: by thresholding the mean probability at 0.5, and by majority
//! vote of per-tile labels. Both boundaries are closed toward class 1: a
//! mean of exactly 0.5, or a tie vote, classifies as 1. The reported
//! variance is the population variance of a slide's tile probabilities,
//! averaged over slides; the margin is the average distance of slide
//! means from the 0.5 boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{batch_tensor, CnnModel, NnError};
use crate::raster::{RasterError, RasterImage};
use crate::tiler::TileRecord;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no tile predictions supplied")]
    EmptyPredictionSet,
    #[error("predictions mix slides {0:?} and {1:?}")]
    MixedSlides(String, String),
    #[error("probability {0} is not a finite value in [0, 1]")]
    BadProbability(f64),
    #[error("label for {0:?} must be 0 or 1, got {1}")]
    BadLabel(String, String),
    #[error("no ground truth for slide {0:?}")]
    MissingGroundTruth(String),
    #[error("duplicate slide id {0:?}")]
    DuplicateSlide(String),
    #[error("test fraction must lie in (0, 1), got {0}")]
    BadTestFraction(f64),
    #[error("need at least one partition")]
    NoPartitions,
    #[error(
        "class {class} has {available} slides; {n_partitions} disjoint test sets of {per_set} need {needed}"
    )]
    InsufficientSlides {
        class: u8,
        available: usize,
        n_partitions: usize,
        per_set: usize,
        needed: usize,
    },
    #[error("no slides with any retained tiles to evaluate")]
    NothingToEvaluate,
    #[error("labels file line {line}: {message}")]
    LabelsParse { line: usize, message: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One tile's classification probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePrediction {
    pub slide_id: String,
    pub x: u32,
    pub y: u32,
    pub size: u32,
    probability: f64,
}

impl TilePrediction {
    pub fn new(
        slide_id: impl Into<String>,
        x: u32,
        y: u32,
        size: u32,
        probability: f64,
    ) -> Result<Self, EvalError> {
        if !probability.is_finite() || !(0.0..=1.0).contains(&probability) {
            return Err(EvalError::BadProbability(probability));
        }
        Ok(Self {
            slide_id: slide_id.into(),
            x,
            y,
            size,
            probability,
        })
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }
}

/// Aggregated verdict for one slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideResult {
    pub slide_id: String,
    pub mean_probability: f64,
    pub vote_fraction_class1: f64,
    pub label_by_mean: u8,
    pub label_by_vote: u8,
    pub tile_count: usize,
    pub tile_prob_variance: f64,
}

/// Combine one slide's tile probabilities into a slide verdict.
pub fn aggregate_slide(preds: &[TilePrediction]) -> Result<SlideResult, EvalError> {
    let first = preds.first().ok_or(EvalError::EmptyPredictionSet)?;
    if let Some(other) = preds.iter().find(|p| p.slide_id != first.slide_id) {
        return Err(EvalError::MixedSlides(
            first.slide_id.clone(),
            other.slide_id.clone(),
        ));
    }
    let n = preds.len() as f64;
    let mean = preds.iter().map(|p| p.probability).sum::<f64>() / n;
    let votes = preds.iter().filter(|p| p.probability >= 0.5).count();
    let vote_fraction = votes as f64 / n;
    let variance = preds
        .iter()
        .map(|p| (p.probability - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(SlideResult {
        slide_id: first.slide_id.clone(),
        mean_probability: mean,
        vote_fraction_class1: vote_fraction,
        label_by_mean: u8::from(mean >= 0.5),
        label_by_vote: u8::from(vote_fraction >= 0.5),
        tile_count: preds.len(),
        tile_prob_variance: variance,
    })
}

/// One slide's row in an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideOutcome {
    #[serde(flatten)]
    pub result: SlideResult,
    pub ground_truth: u8,
    pub correct: bool,
}

/// Test-set metrics: accuracy by mean-probability labels, mean distance
/// of slide means from the boundary, and mean within-slide variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub margin: f64,
    pub mean_tile_variance: f64,
    pub slides: Vec<SlideOutcome>,
}

/// Score tile predictions against ground truth.
///
/// `truth` must name every slide that has predictions. Truth entries with
/// no predictions (every tile sifted away) are logged and excluded from
/// the metrics rather than guessed.
pub fn evaluate(preds: &[TilePrediction], truth: &[(String, u8)]) -> Result<EvalReport, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::EmptyPredictionSet);
    }
    let mut truth_map = BTreeMap::new();
    for (id, label) in truth {
        if *label > 1 {
            return Err(EvalError::BadLabel(id.clone(), label.to_string()));
        }
        if truth_map.insert(id.clone(), *label).is_some() {
            return Err(EvalError::DuplicateSlide(id.clone()));
        }
    }
    let mut by_slide: BTreeMap<&str, Vec<TilePrediction>> = BTreeMap::new();
    for p in preds {
        if !truth_map.contains_key(&p.slide_id) {
            return Err(EvalError::MissingGroundTruth(p.slide_id.clone()));
        }
        by_slide.entry(&p.slide_id).or_default().push(p.clone());
    }
    for (id, _) in truth {
        if !by_slide.contains_key(id.as_str()) {
            log::warn!("slide {id:?} has no retained tiles; excluded from metrics");
        }
    }
    let mut slides = Vec::with_capacity(by_slide.len());
    let (mut correct, mut margin_sum, mut var_sum) = (0usize, 0.0f64, 0.0f64);
    for (id, slide_preds) in &by_slide {
        let result = aggregate_slide(slide_preds)?;
        let ground_truth = truth_map[*id];
        let is_correct = result.label_by_mean == ground_truth;
        correct += usize::from(is_correct);
        margin_sum += (result.mean_probability - 0.5).abs();
        var_sum += result.tile_prob_variance;
        slides.push(SlideOutcome {
            result,
            ground_truth,
            correct: is_correct,
        });
    }
    if slides.is_empty() {
        return Err(EvalError::NothingToEvaluate);
    }
    let n = slides.len() as f64;
    Ok(EvalReport {
        accuracy: correct as f64 / n,
        margin: margin_sum / n,
        mean_tile_variance: var_sum / n,
        slides,
    })
}

/// One cross-validation fold: disjoint train/test slide id sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub train_slides: Vec<String>,
    pub test_slides: Vec<String>,
}

/// Split labeled slides into `n_partitions` folds whose test sets are
/// pairwise disjoint and class-balanced: each takes
/// `round(test_fraction * class_count)` slides per class, drawn from a
/// seeded shuffle; everything else is that fold's training set.
pub fn make_partitions(
    labels: &[(String, u8)],
    n_partitions: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<Partition>, EvalError> {
    if n_partitions == 0 {
        return Err(EvalError::NoPartitions);
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadTestFraction(test_fraction));
    }
    let mut seen = BTreeSet::new();
    let mut by_class: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for (id, label) in labels {
        if *label > 1 {
            return Err(EvalError::BadLabel(id.clone(), label.to_string()));
        }
        if !seen.insert(id.as_str()) {
            return Err(EvalError::DuplicateSlide(id.clone()));
        }
        by_class[*label as usize].push(id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_per_class: [Vec<Vec<&str>>; 2] = [Vec::new(), Vec::new()];
    for (class, ids) in by_class.iter_mut().enumerate() {
        let k = (test_fraction * ids.len() as f64).round() as usize;
        if k == 0 || n_partitions * k > ids.len() {
            return Err(EvalError::InsufficientSlides {
                class: class as u8,
                available: ids.len(),
                n_partitions,
                per_set: k,
                needed: n_partitions * k.max(1),
            });
        }
        ids.shuffle(&mut rng);
        test_per_class[class] = ids.chunks(k).take(n_partitions).map(<[_]>::to_vec).collect();
    }
    let all: BTreeSet<&str> = labels.iter().map(|(id, _)| id.as_str()).collect();
    let partitions = (0..n_partitions)
        .map(|i| {
            let mut test: Vec<String> = test_per_class[0][i]
                .iter()
                .chain(test_per_class[1][i].iter())
                .map(|s| s.to_string())
                .collect();
            test.sort();
            let test_set: BTreeSet<&str> = test.iter().map(String::as_str).collect();
            let train: Vec<String> = all
                .iter()
                .filter(|id| !test_set.contains(*id))
                .map(|s| s.to_string())
                .collect();
            Partition {
                name: format!("fold{}", i + 1),
                train_slides: train,
                test_slides: test,
            }
        })
        .collect();
    Ok(partitions)
}

/// Classify every retained tile of one slide image with a model.
///
/// Records that are not retained are skipped; crops are batched for the
/// forward pass. The slide image must be the same rescaled image the
/// records were measured on.
pub fn predict_tiles(
    model: &CnnModel<f32>,
    img: &RasterImage,
    records: &[TileRecord],
    batch_size: usize,
) -> Result<Vec<TilePrediction>, EvalError> {
    let size = model.input_size();
    let retained: Vec<&TileRecord> = records.iter().filter(|r| r.retained).collect();
    let mut preds = Vec::with_capacity(retained.len());
    for chunk in retained.chunks(batch_size.max(1)) {
        let crops: Vec<RasterImage> = chunk
            .iter()
            .map(|r| img.crop(r.x, r.y, r.size, r.size).map(|c| c.to_rgb()))
            .collect::<Result<_, _>>()?;
        let refs: Vec<&RasterImage> = crops.iter().collect();
        let batch = batch_tensor::<f32>(&refs, size as usize)?;
        let probs = model.predict(&batch)?;
        for (r, p) in chunk.iter().zip(probs.iter()) {
            preds.push(TilePrediction::new(
                r.slide_id.clone(),
                r.x,
                r.y,
                r.size,
                f64::from(*p),
            )?);
        }
    }
    Ok(preds)
}

/// Read a two-column `slide_id,label` file (header row required).
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<(String, u8)>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "slide_id,label")) => {}
        Some((_, other)) => {
            return Err(EvalError::LabelsParse {
                line: 1,
                message: format!("expected header \"slide_id,label\", got {other:?}"),
            })
        }
        None => {
            return Err(EvalError::LabelsParse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut labels = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (id, label) = line.split_once(',').ok_or_else(|| EvalError::LabelsParse {
            line: idx + 1,
            message: format!("expected \"slide_id,label\", got {line:?}"),
        })?;
        let label: u8 = label.parse().map_err(|e| EvalError::LabelsParse {
            line: idx + 1,
            message: format!("bad label {label:?}: {e}"),
        })?;
        if label > 1 {
            return Err(EvalError::BadLabel(id.to_string(), label.to_string()));
        }
        labels.push((id.to_string(), label));
    }
    Ok(labels)
}

/// Write a labels file readable by [`read_labels`], sorted by slide id.
pub fn write_labels(labels: &[(String, u8)], path: impl AsRef<Path>) -> Result<(), EvalError> {
    let mut sorted: Vec<&(String, u8)> = labels.iter().collect();
    sorted.sort();
    let mut text = String::from("slide_id,label\n");
    for (id, label) in sorted {
        text.push_str(&format!("{id},{label}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pred(id: &str, p: f64) -> TilePrediction {
        TilePrediction::new(id, 0, 0, 8, p).unwrap()
    }

    #[test]
    fn aggregate_hand_arithmetic() {
        let r = aggregate_slide(&[pred("s", 0.9), pred("s", 0.8), pred("s", 0.7)]).unwrap();
        assert!((r.mean_probability - 0.8).abs() < 1e-12);
        assert_eq!(r.label_by_mean, 1);
        assert_eq!(r.vote_fraction_class1, 1.0);
        assert_eq!(r.label_by_vote, 1);
        // population variance of {0.9, 0.8, 0.7} is 0.02/3
        assert!((r.tile_prob_variance - 0.02 / 3.0).abs() < 1e-12);
        assert_eq!(r.tile_count, 3);
    }

    #[test]
    fn aggregate_boundary_rules() {
        // mean exactly 0.5 and a tied vote both classify as 1
        let r = aggregate_slide(&[pred("s", 0.4), pred("s", 0.6)]).unwrap();
        assert_eq!(r.mean_probability, 0.5);
        assert_eq!(r.label_by_mean, 1);
        assert_eq!(r.vote_fraction_class1, 0.5);
        assert_eq!(r.label_by_vote, 1);
    }

    #[test]
    fn aggregate_single_tile() {
        let r = aggregate_slide(&[pred("s", 0.2)]).unwrap();
        assert_eq!(r.mean_probability, 0.2);
        assert_eq!(r.label_by_mean, 0);
        assert_eq!(r.tile_prob_variance, 0.0);
    }

    #[test]
    fn aggregate_input_validation() {
        assert!(matches!(
            aggregate_slide(&[]),
            Err(EvalError::EmptyPredictionSet)
        ));
        assert!(matches!(
            aggregate_slide(&[pred("a", 0.5), pred("b", 0.5)]),
            Err(EvalError::MixedSlides(..))
        ));
        assert!(matches!(
            TilePrediction::new("s", 0, 0, 8, 1.5),
            Err(EvalError::BadProbability(_))
        ));
        assert!(matches!(
            TilePrediction::new("s", 0, 0, 8, f64::NAN),
            Err(EvalError::BadProbability(_))
        ));
        // closed endpoints are legal: saturated activations produce them
        assert!(TilePrediction::new("s", 0, 0, 8, 1.0).is_ok());
        assert!(TilePrediction::new("s", 0, 0, 8, 0.0).is_ok());
    }

    #[test]
    fn aggregation_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut preds: Vec<TilePrediction> =
            (0..50).map(|_| pred("s", rng.gen::<f64>())).collect();
        let a = aggregate_slide(&preds).unwrap();
        for _ in 0..10 {
            preds.shuffle(&mut rng);
            let b = aggregate_slide(&preds).unwrap();
            assert!((a.mean_probability - b.mean_probability).abs() < 1e-12);
            assert!((a.tile_prob_variance - b.tile_prob_variance).abs() < 1e-12);
            assert_eq!(a.label_by_mean, b.label_by_mean);
            assert_eq!(a.label_by_vote, b.label_by_vote);
        }
    }

    #[test]
    fn one_sided_probabilities_make_both_labels_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let class1 = rng.gen::<bool>();
            let n = rng.gen_range(1..40);
            let preds: Vec<TilePrediction> = (0..n)
                .map(|_| {
                    let p = if class1 {
                        rng.gen_range(0.5001..1.0)
                    } else {
                        rng.gen_range(0.0..0.4999)
                    };
                    pred("s", p)
                })
                .collect();
            let r = aggregate_slide(&preds).unwrap();
            assert_eq!(r.label_by_mean, r.label_by_vote);
            assert_eq!(r.label_by_mean, u8::from(class1));
        }
    }

    #[test]
    fn metric_ranges_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(1..30);
            let preds: Vec<TilePrediction> =
                (0..n).map(|_| pred("s", rng.gen::<f64>())).collect();
            let r = aggregate_slide(&preds).unwrap();
            let margin = (r.mean_probability - 0.5).abs();
            assert!((0.0..=0.5).contains(&margin));
            assert!((0.0..=0.25 + 1e-12).contains(&r.tile_prob_variance));
        }
    }

    fn truth(pairs: &[(&str, u8)]) -> Vec<(String, u8)> {
        pairs.iter().map(|(s, l)| (s.to_string(), *l)).collect()
    }

    #[test]
    fn evaluate_computes_report_metrics() {
        let preds = vec![
            pred("a", 0.9),
            pred("a", 0.9),
            pred("b", 0.1),
            pred("b", 0.1),
        ];
        let report = evaluate(&preds, &truth(&[("a", 1), ("b", 0)])).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!((report.margin - 0.4).abs() < 1e-12);
        assert_eq!(report.mean_tile_variance, 0.0);
        assert_eq!(report.slides.len(), 2);
        assert!(report.slides.iter().all(|s| s.correct));
    }

    #[test]
    fn evaluate_error_paths_and_exclusion() {
        let preds = vec![pred("a", 0.9)];
        assert!(matches!(
            evaluate(&preds, &truth(&[("b", 0)])),
            Err(EvalError::MissingGroundTruth(_))
        ));
        // ghost slide in truth has no tiles: excluded, metrics over the rest
        let report = evaluate(&preds, &truth(&[("a", 1), ("ghost", 0)])).unwrap();
        assert_eq!(report.slides.len(), 1);
        assert_eq!(report.accuracy, 1.0);
    }

    #[test]
    fn accuracy_survives_relabeling_ids() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut preds = Vec::new();
        for i in 0..8 {
            for _ in 0..5 {
                preds.push(pred(&format!("slide{i}"), rng.gen::<f64>()));
            }
        }
        let t: Vec<(String, u8)> = (0..8).map(|i| (format!("slide{i}"), (i % 2) as u8)).collect();
        let a = evaluate(&preds, &t).unwrap();

        let rename = |s: &str| format!("renamed-{s}");
        let preds2: Vec<TilePrediction> = preds
            .iter()
            .map(|p| {
                TilePrediction::new(rename(&p.slide_id), p.x, p.y, p.size, p.probability()).unwrap()
            })
            .collect();
        let t2: Vec<(String, u8)> = t.iter().map(|(s, l)| (rename(s), *l)).collect();
        let b = evaluate(&preds2, &t2).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.margin, b.margin);
    }

    fn balanced_ids(n_per_class: usize) -> Vec<(String, u8)> {
        let mut labels = Vec::new();
        for i in 0..n_per_class {
            labels.push((format!("neg-{i:03}"), 0));
            labels.push((format!("pos-{i:03}"), 1));
        }
        labels
    }

    #[test]
    fn partitions_match_the_seventy_thirty_layout() {
        let labels = balanced_ids(42);
        let parts = make_partitions(&labels, 3, 0.30, 7).unwrap();
        assert_eq!(parts.len(), 3);
        let mut seen_test: BTreeSet<String> = BTreeSet::new();
        for p in &parts {
            assert_eq!(p.test_slides.len(), 26);
            assert_eq!(p.train_slides.len(), 58);
            let count = |ids: &[String], prefix: &str| {
                ids.iter().filter(|s| s.starts_with(prefix)).count()
            };
            assert_eq!(count(&p.test_slides, "neg-"), 13);
            assert_eq!(count(&p.test_slides, "pos-"), 13);
            assert_eq!(count(&p.train_slides, "neg-"), 29);
            assert_eq!(count(&p.train_slides, "pos-"), 29);
            for id in &p.test_slides {
                assert!(!p.train_slides.contains(id), "{id} in both sets");
                assert!(seen_test.insert(id.clone()), "{id} in two test sets");
            }
        }
    }

    #[test]
    fn partitions_work_at_minimum_size() {
        let labels = balanced_ids(3);
        let parts = make_partitions(&labels, 3, 0.30, 1).unwrap();
        let mut seen = BTreeSet::new();
        for p in &parts {
            assert_eq!(p.test_slides.len(), 2);
            for id in &p.test_slides {
                assert!(seen.insert(id.clone()));
            }
        }
    }

    #[test]
    fn partitions_reject_too_few_slides() {
        let labels = balanced_ids(2); // 4 slides
        assert!(matches!(
            make_partitions(&labels, 3, 0.30, 0),
            Err(EvalError::InsufficientSlides { .. })
        ));
    }

    #[test]
    fn partitions_are_deterministic_and_seed_sensitive() {
        let labels = balanced_ids(10);
        let a = make_partitions(&labels, 3, 0.30, 5).unwrap();
        let b = make_partitions(&labels, 3, 0.30, 5).unwrap();
        assert_eq!(a, b);
        let c = make_partitions(&labels, 3, 0.30, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn partition_properties_hold_over_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..60 {
            let n0 = rng.gen_range(1..40);
            let n1 = rng.gen_range(1..40);
            let folds = rng.gen_range(1..5);
            let fraction = rng.gen_range(0.05..0.6);
            let mut labels: Vec<(String, u8)> =
                (0..n0).map(|i| (format!("a{i}"), 0)).collect();
            labels.extend((0..n1).map(|i| (format!("b{i}"), 1)));
            match make_partitions(&labels, folds, fraction, rng.gen()) {
                Ok(parts) => {
                    assert_eq!(parts.len(), folds);
                    let k0 = (fraction * n0 as f64).round() as usize;
                    let k1 = (fraction * n1 as f64).round() as usize;
                    let mut seen = BTreeSet::new();
                    for p in &parts {
                        assert_eq!(p.test_slides.len(), k0 + k1);
                        assert_eq!(p.train_slides.len() + p.test_slides.len(), labels.len());
                        for id in &p.test_slides {
                            assert!(!p.train_slides.contains(id));
                            assert!(seen.insert(id.clone()));
                        }
                    }
                }
                Err(EvalError::InsufficientSlides { .. }) => {
                    let k0 = (fraction * n0 as f64).round() as usize;
                    let k1 = (fraction * n1 as f64).round() as usize;
                    assert!(
                        k0 == 0 || k1 == 0 || folds * k0 > n0 || folds * k1 > n1,
                        "rejected a feasible layout: {n0}/{n1} folds {folds} fraction {fraction}"
                    );
                }
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }

    #[test]
    fn labels_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let labels = truth(&[("b", 1), ("a", 0), ("c", 1)]);
        write_labels(&labels, &path).unwrap();
        let read = read_labels(&path).unwrap();
        // writer sorts by id
        assert_eq!(read, truth(&[("a", 0), ("b", 1), ("c", 1)]));
        assert!(read_labels("/nonexistent/labels.csv").is_err());
        std::fs::write(&path, "wrong,header\na,0\n").unwrap();
        assert!(matches!(
            read_labels(&path),
            Err(EvalError::LabelsParse { line: 1, .. })
        ));
    }

    #[test]
    fn report_serializes_with_stable_keys() {
        let preds = vec![pred("a", 0.9)];
        let report = evaluate(&preds, &truth(&[("a", 1)])).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["accuracy", "margin", "mean_tile_variance", "slides"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(json["slides"][0].get("slide_id").is_some());
        assert!(json["slides"][0].get("ground_truth").is_some());
    }
}

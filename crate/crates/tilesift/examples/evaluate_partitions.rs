//! Stratified train/test partitions and slide-level scoring.
//!
//! Run with: cargo run --release --example evaluate_partitions

use tilesift::eval::{evaluate, make_partitions, TilePrediction};

fn main() {
    // 42 slides per class, mirroring a balanced two-class corpus
    let labels: Vec<(String, u8)> = (0..42)
        .flat_map(|i| [(format!("neg-{i:03}"), 0u8), (format!("pos-{i:03}"), 1u8)])
        .collect();

    let partitions = make_partitions(&labels, 3, 0.30, 7).expect("partitioning");
    for p in &partitions {
        println!(
            "{}: {} train / {} test (first test slides: {:?})",
            p.name,
            p.train_slides.len(),
            p.test_slides.len(),
            &p.test_slides[..3]
        );
    }

    // score hand-made tile probabilities for one fold's test slides
    let test = &partitions[0].test_slides;
    let mut preds = Vec::new();
    for id in test {
        let class1 = id.starts_with("pos-");
        for t in 0..5 {
            // confident on the true side, with mild tile-to-tile spread
            let p = if class1 { 0.80 } else { 0.20 } + 0.02 * f64::from(t);
            preds.push(TilePrediction::new(id.clone(), 0, 0, 64, p).unwrap());
        }
    }
    let truth: Vec<(String, u8)> = labels
        .iter()
        .filter(|(id, _)| test.contains(id))
        .cloned()
        .collect();
    let report = evaluate(&preds, &truth).expect("evaluation");
    println!(
        "accuracy {:.4}, margin {:.4}, mean tile variance {:.6}",
        report.accuracy, report.margin, report.mean_tile_variance
    );
    let first = &report.slides[0];
    println!(
        "first slide {}: mean {:.3}, label {} (truth {})",
        first.result.slide_id,
        first.result.mean_probability,
        first.result.label_by_mean,
        first.ground_truth
    );
}

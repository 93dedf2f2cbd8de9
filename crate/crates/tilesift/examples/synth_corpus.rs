//! Generate a small labeled corpus of synthetic slides.
//!
//! Run with: cargo run --release --example synth_corpus

use std::path::PathBuf;

use tilesift::synth::generate_corpus;

fn main() {
    let out = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../target/example-output/synth_corpus");
    let labels = generate_corpus(&out, 3, 384, 384, 7).expect("corpus generation");
    println!("wrote {} slides to {}", labels.len(), out.display());
    for (id, label) in &labels {
        println!("  {id} -> class {label}");
    }
    println!("labels file: {}", out.join("labels.csv").display());
}

//! Parameter and FLOP accounting for the reference model across tile
//! sizes.
//!
//! Run with: cargo run --release --example count_model_cost

use tilesift::nn::{build_reference_model, count_params_flops};

fn main() {
    println!("{:>6}  {:>12}  {:>16}", "size", "params", "forward FLOPs");
    for size in [32u32, 64, 100, 224, 350, 550] {
        let model = build_reference_model::<f32>(size, 0).expect("model");
        let (params, flops) = count_params_flops(&model);
        println!("{size:>6}  {params:>12}  {flops:>16}");
    }
    println!("\nFLOPs use the 1 multiply-accumulate = 2 FLOPs convention,");
    println!("counted for a single forward pass at batch size 1.");
}

//! Per-level column weights equalize the scale of mixed anchor columns and
//! shrink the condition number of the anchor matrix.
//!
//! ```text
//! cargo run --release --example weighting -- [seed]
//! ```

use msnn::datagen::{LatentModel, ModelParams};
use msnn::spectral::condition_number;
use msnn::{Treatment, WeightFunction};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> msnn::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse()).expect("seed");
    let toy = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 625.0]);
    let toy_w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    println!("diag(1, 625): condition {} before, {} after weighting", condition_number(&toy), condition_number(&toy_w));

    let params = ModelParams::four_level_benchmark();
    let model = LatentModel::generate(params.clone(), seed)?;
    let weights = WeightFunction::oracle(&params.scales)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (3, 8);
    for trial in 0..5 {
        let r: Vec<usize> = (0..rows).map(|_| rng.random_range(0..params.m)).collect();
        let c: Vec<(usize, Treatment)> = (0..cols)
            .map(|k| (rng.random_range(0..params.n), Treatment(if k % 2 == 0 { 1 } else { 4 })))
            .collect();
        let raw = DMatrix::from_fn(rows, cols, |a, b| model.expected(r[a], c[b].0, c[b].1));
        let w = DMatrix::from_fn(rows, cols, |a, b| raw[(a, b)] * weights.get(c[b].1).unwrap());
        println!(
            "anchor {trial}: condition {:.1} unweighted, {:.1} weighted",
            condition_number(&raw),
            condition_number(&w)
        );
    }
    Ok(())
}

//! Noiseless recovery: with σ = 0 and the rank fixed to the true rank, every
//! feasible estimate reproduces the latent mean up to rounding.
//!
//! ```text
//! cargo run --release --example zero_noise -- [seed]
//! ```

use msnn::datagen::{simulate_panel, LatentModel};
use msnn::estimators::{estimate_entry, PipelineConfig};
use msnn::harness::{replicate_seeds, ExperimentConfig};
use msnn::{EntryQuery, EstimatorKind, Treatment, WeightFunction};

fn main() -> msnn::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse()).expect("seed");
    let mut cfg = ExperimentConfig::preset("zero-noise")?;
    cfg.seed = seed;
    let seeds = replicate_seeds(cfg.seed, 0);
    let model = LatentModel::generate(cfg.model.clone(), seeds.model)?;
    let panel = simulate_panel(&model, &cfg.assignment, seeds.assignment, seeds.noise)?;
    let weights = WeightFunction::oracle(&cfg.model.scales)?;
    let pipeline = PipelineConfig {
        rank_rule: cfg.rank_rule,
        ..PipelineConfig::default()
    };
    for level in [1u16, 3] {
        let (mut feasible, mut worst) = (0usize, 0.0f64);
        for i in (0..panel.rows()).step_by(10) {
            for j in 0..panel.cols() {
                let q = EntryQuery::new(i, j, level);
                let rec = estimate_entry(&panel, &q, EstimatorKind::Msnn, Some(&weights), &pipeline)?;
                if let Some(est) = rec.estimate {
                    let truth = model.expected(i, j, Treatment(level));
                    worst = worst.max(((est - truth) / truth).abs());
                    feasible += 1;
                }
            }
        }
        println!("level {level}: {feasible} feasible entries on every tenth row, worst relative error {worst:.2e}");
    }
    Ok(())
}

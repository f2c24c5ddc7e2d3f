//! Averaging over row-disjoint subgroups and the plug-in normal interval.
//!
//! ```text
//! cargo run --release --example confidence_intervals -- [k]
//! ```

use msnn::datagen::{simulate_panel, AssignmentMechanism, LatentModel, ModelParams};
use msnn::estimators::{estimate_entry, PipelineConfig};
use msnn::{EntryQuery, EstimatorKind, RankRule, Treatment, WeightFunction};

fn main() -> msnn::Result<()> {
    let k = std::env::args().nth(1).map_or(Ok(4), |s| s.parse()).expect("k");
    let params = ModelParams {
        m: 120,
        n: 40,
        rank: 2,
        scales: vec![1.0, 5.0],
        sigma_rel: 0.05,
        abs_outcomes: false,
    };
    let model = LatentModel::generate(params.clone(), 11)?;
    let mech = AssignmentMechanism::Mcar {
        probs: vec![0.05, 0.45, 0.5],
    };
    let panel = simulate_panel(&model, &mech, 12, 13)?;
    let weights = WeightFunction::oracle(&params.scales)?;
    let cfg = PipelineConfig {
        k,
        rank_rule: RankRule::Fixed(params.rank),
        ci_level: Some(0.95),
        ..PipelineConfig::default()
    };
    let (mut with_ci, mut covered) = (0, 0);
    for i in 0..20 {
        let q = EntryQuery::new(i, 0, 1);
        let rec = estimate_entry(&panel, &q, EstimatorKind::Msnn, Some(&weights), &cfg)?;
        let truth = model.expected(i, 0, Treatment(1));
        if let (Some(est), Some(ci)) = (rec.estimate, rec.ci) {
            with_ci += 1;
            covered += usize::from(ci.lower <= truth && truth <= ci.upper);
            println!("row {i}: {est:.4} in [{:.4}, {:.4}] from {} subgroups, truth {truth:.4}", ci.lower, ci.upper, rec.k_used);
        }
    }
    println!("{covered} of {with_ci} intervals cover the truth");
    Ok(())
}

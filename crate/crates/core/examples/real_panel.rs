//! Estimation on an ingested panel: export a simulated panel to CSV, load it
//! back, and estimate held-out and observed entries with estimated weights.
//!
//! ```text
//! cargo run --release --example real_panel -- [out_dir]
//! ```

use msnn::datagen::{simulate_panel, AssignmentMechanism, LatentModel, ModelParams};
use msnn::harness::{run_real_panel, EstimatorSelection, RealPanelConfig, Targets};
use msnn::panel::{load_panel_csv, write_panel_csv, PanelCsvOptions};
use msnn::{EntryQuery, Treatment, WeightSource};

fn main() -> msnn::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().display().to_string());
    let params = ModelParams {
        m: 60,
        n: 30,
        rank: 2,
        scales: vec![1.0, 10.0],
        sigma_rel: 0.001,
        abs_outcomes: false,
    };
    let model = LatentModel::generate(params, 3)?;
    let mech = AssignmentMechanism::Mcar {
        probs: vec![0.1, 0.3, 0.6],
    };
    let panel = simulate_panel(&model, &mech, 4, 5)?;
    let path = std::path::Path::new(&dir).join("panel.csv");
    write_panel_csv(&panel, &path)?;
    let loaded = load_panel_csv(&path, PanelCsvOptions { levels: Some(2) })?;
    println!("wrote and reloaded {} ({} observed cells)", path.display(), loaded.observed_count());

    let cfg = RealPanelConfig {
        estimators: EstimatorSelection::Msnn,
        weights: WeightSource::EstimatedMaxAbs,
        ..RealPanelConfig::default()
    };
    let targets = Targets::List((0..6).map(|i| EntryQuery::new(i, 0, 1)).collect());
    for row in run_real_panel(&loaded, &targets, &cfg)? {
        let truth = model.expected(row.row, row.col, Treatment(row.level));
        match row.estimate {
            Some(est) => println!(
                "({}, {}) level {}: estimate {est:.4}, truth {truth:.4}, validation residual {:?}",
                row.row_id, row.col_id, row.level, row.validation_residual
            ),
            None => println!("({}, {}) infeasible: {}", row.row_id, row.col_id, row.reason.unwrap_or_default()),
        }
    }
    Ok(())
}

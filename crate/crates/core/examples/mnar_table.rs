//! Softmax missing-not-at-random assignment at both benchmark temperatures.
//!
//! ```text
//! cargo run --release --example mnar_table -- [replicates] [seed]
//! ```

use msnn::harness::{format_table, run_simulation_study, ExperimentConfig};

fn main() -> msnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().map_or(Ok(2), |s| s.parse()).expect("replicates");
    let seed = args.next().map_or(Ok(0), |s| s.parse()).expect("seed");
    for preset in ["mnar-0.05", "mnar-0.02"] {
        let mut cfg = ExperimentConfig::preset(preset)?;
        cfg.replicates = replicates;
        cfg.seed = seed;
        let out = run_simulation_study(&cfg)?;
        println!("{preset}");
        print!("{}", format_table(&out.metrics));
        println!();
    }
    Ok(())
}

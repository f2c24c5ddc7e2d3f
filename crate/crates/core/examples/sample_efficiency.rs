//! Expected anchor counts under MCAR: closed forms against Monte Carlo
//! enumeration, and the MSNN over SNN efficiency ratio.
//!
//! ```text
//! cargo run --release --example sample_efficiency -- [draws]
//! ```

use msnn::theory::{efficiency_ratios, monte_carlo_expectations, sparsity_report, TheoryInstance, DEFAULT_COUNT_BUDGET};

fn main() -> msnn::Result<()> {
    let draws = std::env::args().nth(1).map_or(Ok(2000), |s| s.parse()).expect("draws");
    let instances = [
        TheoryInstance::new(3, 3, 1, 1, vec![0.5], 1)?,
        TheoryInstance::new(6, 5, 2, 1, vec![0.3, 0.5], 1)?,
        TheoryInstance::new(40, 40, 2, 2, vec![0.02, 0.2], 2)?,
    ];
    for inst in &instances {
        let study = monte_carlo_expectations(inst, draws, 1, DEFAULT_COUNT_BUDGET)?;
        let ratios = efficiency_ratios(inst);
        println!("m={} n={} r={} c={} p={:?} level {}", inst.m, inst.n, inst.r, inst.c, inst.probs, inst.level);
        for rep in [&study.snn, &study.msnn] {
            println!(
                "  {}: E[K'] closed form {:.4}, Monte Carlo {:.4} ± {:.4}, P(K >= 1) {:.3}",
                rep.estimator, rep.closed_form.value, rep.k_prime.mean, rep.k_prime.se, rep.k_geq_1.mean
            );
        }
        println!(
            "  ratio: predicted {:.4}, Monte Carlo {:.4} ± {:.4}",
            ratios.msnn_over_snn.value, study.ratio, study.ratio_se
        );
        let small = sparsity_report(inst).iter().filter(|p| p.small()).count();
        println!("  sparsity terms below one at {small} of 9 alpha values");
    }
    Ok(())
}

//! Generator and assignment mechanism checks.

use msnn::datagen::{assign_mcar, assign_mnar_softmax, simulate_panel, softmax_probs, AssignmentMechanism, LatentModel, ModelParams};
use msnn::panel::observed_fraction;
use msnn::spectral::SvdFactors;
use msnn::Treatment;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn benchmark(abs: bool) -> LatentModel {
    LatentModel::generate(
        ModelParams {
            abs_outcomes: abs,
            ..ModelParams::four_level_benchmark()
        },
        21,
    )
    .unwrap()
}

#[test]
fn mcar_levels_pass_goodness_of_fit() {
    let model = benchmark(false);
    let probs = [0.115, 0.01, 0.025, 0.05, 0.8];
    let panel = assign_mcar(&model, &probs, 4).unwrap();
    let n = (panel.rows() * panel.cols()) as f64;
    assert_eq!(n, 30_000.0);
    let mut stat = 0.0;
    for (d, p) in probs.iter().enumerate() {
        let observed = observed_fraction(&panel, Treatment(d as u16)) * n;
        stat += (observed - n * p).powi(2) / (n * p);
        let se = (p * (1.0 - p) / n).sqrt();
        assert!((observed / n - p).abs() <= 3.0 * se, "level {d}");
    }
    let p_value = 1.0 - ChiSquared::new(4.0).unwrap().cdf(stat);
    assert!(p_value > 0.001, "chi-square {stat}, p = {p_value}");
}

#[test]
fn all_missing_mcar_is_empty() {
    let panel = assign_mcar(&benchmark(false), &[1.0, 0.0, 0.0, 0.0, 0.0], 1).unwrap();
    assert_eq!(panel.observed_count(), 0);
}

#[test]
fn latent_means_respect_level_bounds() {
    let model = benchmark(false);
    for (d, f) in [1.0, 5.0, 25.0, 625.0].iter().enumerate() {
        let t = Treatment(d as u16 + 1);
        for i in 0..300 {
            for j in 0..100 {
                assert!(model.expected(i, j, t).abs() <= f * (1.0 + 1e-12));
            }
        }
    }
    let one = LatentModel::generate(
        ModelParams {
            m: 20,
            n: 10,
            rank: 1,
            scales: vec![1.0],
            sigma_rel: 0.1,
            abs_outcomes: false,
        },
        3,
    )
    .unwrap();
    assert!((0..200).all(|k| one.expected(k / 10, k % 10, Treatment(1)).abs() <= 1.0 + 1e-12));
}

#[test]
fn model_is_a_function_of_the_seed() {
    let p = ModelParams::four_level_benchmark();
    let a = LatentModel::generate(p.clone(), 1).unwrap();
    let b = LatentModel::generate(p.clone(), 1).unwrap();
    let c = LatentModel::generate(p, 2).unwrap();
    assert_eq!(a.row_factors(), b.row_factors());
    assert_ne!(a.row_factors(), c.row_factors());
}

#[test]
fn stacked_levels_share_row_space() {
    let model = LatentModel::generate(
        ModelParams {
            m: 30,
            n: 12,
            rank: 3,
            scales: vec![1.0, 5.0, 25.0],
            sigma_rel: 0.0,
            abs_outcomes: false,
        },
        8,
    )
    .unwrap();
    let stacked = model.stacked_expected();
    assert_eq!(stacked.shape(), (30, 36));
    let sv = SvdFactors::compute(&stacked).singular_values;
    let rank = sv.iter().filter(|&&s| s > 1e-9 * sv[0]).count();
    assert!(rank <= 3, "rank {rank}");
}

#[test]
fn noise_std_tracks_level_scale() {
    let model = benchmark(false);
    let mech = AssignmentMechanism::Mcar {
        probs: vec![0.0, 0.25, 0.25, 0.25, 0.25],
    };
    let panel = simulate_panel(&model, &mech, 5, 6).unwrap();
    for d in 1..=4u16 {
        let t = Treatment(d);
        let resid: Vec<f64> = (0..300 * 100)
            .filter(|&k| panel.treatment(k / 100, k % 100) == t)
            .map(|k| panel.outcome(k / 100, k % 100).unwrap() - model.expected(k / 100, k % 100, t))
            .collect();
        assert!(resid.len() > 7000);
        let sd = (resid.iter().map(|e| e * e).sum::<f64>() / resid.len() as f64).sqrt();
        let want = model.noise_sd(t);
        assert!((sd / want - 1.0).abs() <= 0.2, "level {d}: {sd} vs {want}");
    }
}

#[test]
fn mnar_labels_ignore_the_noise_seed() {
    let model = benchmark(true);
    let mech = AssignmentMechanism::MnarSoftmax {
        lambda: 0.05,
        thinning: 0.0,
    };
    let a = simulate_panel(&model, &mech, 9, 100).unwrap();
    let b = simulate_panel(&model, &mech, 9, 200).unwrap();
    assert_eq!(a.treatments(), b.treatments());
    assert_ne!(a.outcome(0, 0).unwrap(), b.outcome(0, 0).unwrap());
}

#[test]
fn mnar_low_level_share_matches_reported_proportion() {
    let panel = assign_mnar_softmax(&benchmark(true), 0.05, 2).unwrap();
    let low = 100.0 * observed_fraction(&panel, Treatment(1));
    assert!((low - 1.30).abs() <= 0.3, "{low}%");
}

#[test]
fn softmax_edge_cases() {
    let mut out = [0.0; 2];
    softmax_probs(0.7, &[3.0, 3.0], &mut out);
    assert_eq!(out, [0.5, 0.5]);
    let mut out = [0.0; 4];
    softmax_probs(0.0, &[1.0, 5.0, 25.0, 625.0], &mut out);
    assert!(out.iter().all(|&p| (p - 0.25).abs() < 1e-15));
}

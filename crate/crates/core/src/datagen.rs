//! Synthetic ground truth: a shared-row-factor latent model, MCAR and softmax
//! MNAR treatment assignment, and Gaussian noise scaled per level.
//!
//! Every random stream is derived from an explicit seed. Assignment and noise
//! use one ChaCha stream per panel row, so generating rows in parallel gives
//! the same panel as generating them in order.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{ObservedPanel, Treatment};

/// Dimensions, per-level scales and noise level of a latent model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    /// `f(d)` for `d = 1..=l`.
    pub scales: Vec<f64>,
    /// Noise std at level `d` is `sigma_rel * f(d)`.
    pub sigma_rel: f64,
    /// Take `|A|` entrywise (used with the softmax mechanism).
    #[serde(default)]
    pub abs_outcomes: bool,
}

impl ModelParams {
    /// 300 x 100, rank 3, four levels with scales 1, 5, 25, 625 and 0.1%
    /// relative noise.
    pub fn four_level_benchmark() -> Self {
        ModelParams {
            m: 300,
            n: 100,
            rank: 3,
            scales: vec![1.0, 5.0, 25.0, 625.0],
            sigma_rel: 0.001,
            abs_outcomes: false,
        }
    }

    pub fn levels(&self) -> usize {
        self.scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.rank == 0 {
            return Err(Error::Domain("dimensions and rank must be positive".into()));
        }
        if self.rank > self.m.min(self.n) {
            return Err(Error::Domain(format!(
                "rank {} exceeds min({}, {})",
                self.rank, self.m, self.n
            )));
        }
        if self.scales.is_empty() || self.scales.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Domain("level scales must be positive and finite".into()));
        }
        if self.scales.len() > u16::MAX as usize {
            return Err(Error::Domain("too many levels".into()));
        }
        if !(self.sigma_rel.is_finite() && self.sigma_rel >= 0.0) {
            return Err(Error::Domain("sigma_rel must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Ground-truth factors. `A^(d) = U V^(d)ᵀ` with unit-norm rows of `U` shared
/// by all levels and rows of `V^(d)` of norm `f(d)`, so `|A^(d)_ij| <= f(d)`.
#[derive(Debug, Clone)]
pub struct LatentModel {
    params: ModelParams,
    u: DMatrix<f64>,
    v: Vec<DMatrix<f64>>,
    /// `[level][i * n + j]`.
    expected: Vec<Vec<f64>>,
}

impl LatentModel {
    pub fn generate(params: ModelParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n, r) = (params.m, params.n, params.rank);
        let u = unit_rows(DMatrix::from_fn(m, r, |_, _| rng.sample(StandardNormal)), 1.0);
        let v: Vec<DMatrix<f64>> = params
            .scales
            .iter()
            .map(|&f| unit_rows(DMatrix::from_fn(n, r, |_, _| rng.sample(StandardNormal)), f))
            .collect();
        let expected = v
            .iter()
            .map(|vd| {
                let a = &u * vd.transpose();
                let mut flat = Vec::with_capacity(m * n);
                for i in 0..m {
                    for j in 0..n {
                        let x = a[(i, j)];
                        flat.push(if params.abs_outcomes { x.abs() } else { x });
                    }
                }
                flat
            })
            .collect();
        Ok(LatentModel { params, u, v, expected })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn levels(&self) -> u16 {
        self.params.scales.len() as u16
    }

    pub fn scale(&self, level: Treatment) -> f64 {
        self.params.scales[level.index() - 1]
    }

    pub fn row_factors(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn col_factors(&self, level: Treatment) -> &DMatrix<f64> {
        &self.v[level.index() - 1]
    }

    /// `A_ij^(d)`.
    #[inline]
    pub fn expected(&self, i: usize, j: usize, level: Treatment) -> f64 {
        self.expected[level.index() - 1][i * self.params.n + j]
    }

    /// Noise std at `level`.
    pub fn noise_sd(&self, level: Treatment) -> f64 {
        self.params.sigma_rel * self.scale(level)
    }

    /// Side-by-side `[A^(1) | ... | A^(l)]`, `m x (l n)`.
    pub fn stacked_expected(&self) -> DMatrix<f64> {
        let (m, n, l) = (self.params.m, self.params.n, self.params.levels());
        DMatrix::from_fn(m, n * l, |i, c| self.expected[c / n][i * n + c % n])
    }
}

fn unit_rows(mut x: DMatrix<f64>, norm: f64) -> DMatrix<f64> {
    for mut row in x.row_iter_mut() {
        let len = row.norm();
        if len > 0.0 {
            row *= norm / len;
        }
    }
    x
}

/// How treatment labels are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssignmentMechanism {
    /// i.i.d. categorical; `probs[0]` is the probability of no exposure and
    /// `probs[d]` that of level `d`.
    Mcar { probs: Vec<f64> },
    /// `P(D_ij = d) ∝ exp(λ A_ij^(d))` over the nonzero levels. With
    /// `thinning > 0`, each entry is first made missing with that probability.
    MnarSoftmax {
        lambda: f64,
        #[serde(default)]
        thinning: f64,
    },
}

impl AssignmentMechanism {
    /// `(0.115, 0.01, 0.025, 0.05, 0.8)` over `(missing, low, medium, high, very high)`.
    pub fn benchmark_mcar() -> Self {
        AssignmentMechanism::Mcar {
            probs: vec![0.115, 0.01, 0.025, 0.05, 0.8],
        }
    }

    pub fn validate(&self, levels: usize) -> Result<()> {
        match self {
            AssignmentMechanism::Mcar { probs } => {
                if probs.len() != levels + 1 {
                    return Err(Error::Domain(format!(
                        "MCAR needs {} probabilities (missing + {levels} levels), got {}",
                        levels + 1,
                        probs.len()
                    )));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::Domain("MCAR probabilities must be >= 0".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!("MCAR probabilities sum to {total}, not 1")));
                }
            }
            AssignmentMechanism::MnarSoftmax { lambda, thinning } => {
                if !lambda.is_finite() {
                    return Err(Error::Domain("softmax lambda must be finite".into()));
                }
                if !(0.0..1.0).contains(thinning) {
                    return Err(Error::Domain("thinning must lie in [0, 1)".into()));
                }
            }
        }
        Ok(())
    }
}

/// Softmax over the nonzero levels of `exp(λ a_d)`, written into `out`.
pub fn softmax_probs(lambda: f64, expected: &[f64], out: &mut [f64]) {
    let top = expected.iter().map(|a| lambda * a).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, a) in out.iter_mut().zip(expected) {
        *o = (lambda * a - top).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Index of the category hit by `u ∈ [0, 1)` under cumulative `probs`.
fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left `u` above the last cumulative value; take the last
    // category with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// Draws labels with `assign_seed` and noise with `noise_seed`.
///
/// The observed outcome is `A_ij^(D_ij) + ε_ij` with `ε_ij ~ N(0, (σ f(D_ij))²)`.
/// One noise value is drawn for every entry, so the noise of an entry does
/// not depend on the labels.
pub fn simulate_panel(
    model: &LatentModel,
    mechanism: &AssignmentMechanism,
    assign_seed: u64,
    noise_seed: u64,
) -> Result<ObservedPanel> {
    let levels = model.params.levels();
    mechanism.validate(levels)?;
    if matches!(mechanism, AssignmentMechanism::MnarSoftmax { .. }) && !model.params.abs_outcomes {
        return Err(Error::Domain(
            "softmax assignment expects a model with abs_outcomes = true".into(),
        ));
    }
    let (m, n) = (model.params.m, model.params.n);
    let rows: Vec<(Vec<Treatment>, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut arng = row_rng(assign_seed, i);
            let mut nrng = row_rng(noise_seed, i);
            let mut labels = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            let mut a = vec![0.0; levels];
            let mut probs = vec![0.0; levels];
            for j in 0..n {
                let label = match mechanism {
                    AssignmentMechanism::Mcar { probs } => categorical(probs, arng.random()),
                    AssignmentMechanism::MnarSoftmax { lambda, thinning } => {
                        let keep: f64 = arng.random();
                        let pick: f64 = arng.random();
                        if keep < *thinning {
                            0
                        } else {
                            for (d, slot) in a.iter_mut().enumerate() {
                                *slot = model.expected(i, j, Treatment(d as u16 + 1));
                            }
                            softmax_probs(*lambda, &a, &mut probs);
                            categorical(&probs, pick) + 1
                        }
                    }
                };
                let z: f64 = nrng.sample(StandardNormal);
                let t = Treatment(label as u16);
                labels.push(t);
                ys.push(if t.is_observed() {
                    model.expected(i, j, t) + z * model.noise_sd(t)
                } else {
                    f64::NAN
                });
            }
            (labels, ys)
        })
        .collect();
    let (mut treatments, mut outcomes) = (Vec::with_capacity(m * n), Vec::with_capacity(m * n));
    for (t, y) in rows {
        treatments.extend(t);
        outcomes.extend(y);
    }
    ObservedPanel::new(m, n, levels as u16, treatments, outcomes)
}

/// Seeds for assignment and noise derived from one run seed.
pub fn split_seed(seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (rng.random(), rng.random())
}

/// MCAR panel; `probs[0]` is the missing probability.
pub fn assign_mcar(model: &LatentModel, probs: &[f64], seed: u64) -> Result<ObservedPanel> {
    let (a, e) = split_seed(seed);
    simulate_panel(model, &AssignmentMechanism::Mcar { probs: probs.to_vec() }, a, e)
}

/// Softmax MNAR panel with no missing entries.
pub fn assign_mnar_softmax(model: &LatentModel, lambda: f64, seed: u64) -> Result<ObservedPanel> {
    let (a, e) = split_seed(seed);
    simulate_panel(model, &AssignmentMechanism::MnarSoftmax { lambda, thinning: 0.0 }, a, e)
}

/// `row_id,col_id,treatment,A_value` for every entry and level.
pub fn write_ground_truth_csv(model: &LatentModel, panel: &ObservedPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "row_id,col_id,treatment,A_value").map_err(io)?;
    for i in 0..panel.rows() {
        for j in 0..panel.cols() {
            for d in 1..=model.levels() {
                let t = Treatment(d);
                writeln!(
                    w,
                    "{},{},{},{}",
                    panel.row_ids()[i],
                    panel.col_ids()[j],
                    d,
                    model.expected(i, j, t)
                )
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

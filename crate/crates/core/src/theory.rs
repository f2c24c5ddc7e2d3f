//! Expected anchor counts under MCAR assignment: closed forms, efficiency
//! ratios, and enumeration / Monte Carlo counters to check them against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::panel::Treatment;

/// Default node budget for the exact counters.
pub const DEFAULT_COUNT_BUDGET: u64 = 1_000_000;

/// Grid size, anchor shape and MCAR level probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInstance {
    pub m: usize,
    pub n: usize,
    /// Anchor rows.
    pub r: usize,
    /// Anchor columns.
    pub c: usize,
    /// `probs[d - 1] = p_d` over the nonzero levels.
    pub probs: Vec<f64>,
    pub level: Treatment,
}

impl TheoryInstance {
    pub fn new(m: usize, n: usize, r: usize, c: usize, probs: Vec<f64>, level: u16) -> Result<Self> {
        let inst = TheoryInstance {
            m,
            n,
            r,
            c,
            probs,
            level: Treatment(level),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.c == 0 {
            return Err(Error::Domain("anchor shape must be at least 1x1".into()));
        }
        if self.m == 0 || self.n == 0 || self.r > self.m - 1 || self.c > self.n - 1 {
            return Err(Error::Domain(format!(
                "anchor {}x{} does not fit a {}x{} grid",
                self.r, self.c, self.m, self.n
            )));
        }
        if self.probs.is_empty() || self.probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("level probabilities must be finite and >= 0".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("level probabilities sum to {total} > 1")));
        }
        if !(self.p_max() > 0.0) {
            return Err(Error::Domain("at least one level needs positive probability".into()));
        }
        if self.level.0 == 0 || self.level.index() > self.probs.len() {
            return Err(Error::Domain(format!("target level {} out of range", self.level)));
        }
        Ok(())
    }

    pub fn p_d(&self) -> f64 {
        self.probs[self.level.index() - 1]
    }

    pub fn p_max(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// MCAR probabilities with the missing mass `1 − Σ p` first.
    pub fn mcar_probs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.probs.len() + 1);
        out.push((1.0 - self.probs.iter().sum::<f64>()).max(0.0));
        out.extend(&self.probs);
        out
    }
}

/// `γ = Σ_{d'} (p_{d'} / p_max)^{r+1}`.
pub fn gamma(probs: &[f64], r: usize) -> f64 {
    let p_max = probs.iter().copied().fold(0.0, f64::max);
    if !(p_max > 0.0) {
        return f64::NAN;
    }
    probs.iter().map(|p| (p / p_max).powi(r as i32 + 1)).sum()
}

/// A value evaluated in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub ln_value: f64,
    pub value: f64,
    /// `exp(ln_value)` is not representable as a finite `f64`.
    pub overflow: bool,
}

impl LogValue {
    pub fn from_ln(ln_value: f64) -> Self {
        let value = ln_value.exp();
        LogValue {
            ln_value,
            value,
            overflow: ln_value.is_finite() && value.is_infinite(),
        }
    }
}

fn ln_pow(p: f64, k: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * p.ln()
    }
}

/// Expected number of valid `(r, c)` anchor pairs for one target entry.
///
/// SNN: `C(m−1,r) C(n−1,c) p_d^{rc+r+c}`.
/// MSNN: `C(m−1,r) C(n−1,c) γ^c p_d^r p_max^{(r+1)c}`.
pub fn expected_k_closed_form(inst: &TheoryInstance, kind: EstimatorKind) -> LogValue {
    let (r, c) = (inst.r as f64, inst.c as f64);
    let ln_choose = ln_binomial(inst.m as u64 - 1, inst.r as u64) + ln_binomial(inst.n as u64 - 1, inst.c as u64);
    let p_d = inst.p_d();
    let ln = match kind {
        EstimatorKind::Snn => ln_choose + ln_pow(p_d, r * c + r + c),
        EstimatorKind::Msnn => {
            let g = gamma(&inst.probs, inst.r);
            ln_choose + c * g.ln() + ln_pow(p_d, r) + ln_pow(inst.p_max(), (r + 1.0) * c)
        }
    };
    LogValue::from_ln(ln)
}

/// The three leading-order efficiency ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyRatios {
    /// `E[K'_MSNN(d)] / E[K'_SNN(d)] = [Σ (p_{d'} / p_d)^{r+1}]^c`.
    pub msnn_over_snn: LogValue,
    /// `E[K'_SNN(d)] / E[K'_MSNN(d_max)] = γ^{-c} (p_d / p_max)^{rc+r+c}`.
    pub snn_d_over_msnn_dmax: LogValue,
    /// `E[K'_MSNN(d)] / E[K'_MSNN(d_max)] = (p_d / p_max)^r`.
    pub msnn_d_over_msnn_dmax: LogValue,
}

pub fn efficiency_ratios(inst: &TheoryInstance) -> EfficiencyRatios {
    let (r, c) = (inst.r as f64, inst.c as f64);
    let (p_d, p_max) = (inst.p_d(), inst.p_max());
    let sum_rel: f64 = inst.probs.iter().map(|p| (p / p_d).powf(r + 1.0)).sum();
    let g = gamma(&inst.probs, inst.r);
    let ln_rel = (p_d / p_max).ln();
    EfficiencyRatios {
        msnn_over_snn: LogValue::from_ln(c * sum_rel.ln()),
        snn_d_over_msnn_dmax: LogValue::from_ln(-c * g.ln() + (r * c + r + c) * ln_rel),
        msnn_d_over_msnn_dmax: LogValue::from_ln(r * ln_rel),
    }
}

/// Sparsity terms at one value of `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparsityPoint {
    pub alpha: f64,
    /// `m r p_d p_max^{α c}`.
    pub row_term: f64,
    /// `n c γ p_max^{(1−α) r + 1 + α}`.
    pub col_term: f64,
}

impl SparsityPoint {
    /// Both terms are below one.
    pub fn small(&self) -> bool {
        self.row_term < 1.0 && self.col_term < 1.0
    }
}

/// The sparsity terms scanned over `α ∈ {0.1, …, 0.9}`.
pub fn sparsity_report(inst: &TheoryInstance) -> Vec<SparsityPoint> {
    let (m, n, r, c) = (inst.m as f64, inst.n as f64, inst.r as f64, inst.c as f64);
    let (p_d, p_max, g) = (inst.p_d(), inst.p_max(), gamma(&inst.probs, inst.r));
    (1..=9)
        .map(|k| {
            let alpha = k as f64 / 10.0;
            SparsityPoint {
                alpha,
                row_term: m * r * p_d * p_max.powf(alpha * c),
                col_term: n * c * g * p_max.powf((1.0 - alpha) * r + 1.0 + alpha),
            }
        })
        .collect()
}

/// Exact counts for one assignment grid and target entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnchorCounts {
    /// Valid `(MAR, MAC)` pairs of the instance shape.
    pub k_prime: u128,
    /// Unordered pairs of distinct valid anchors whose row sets intersect.
    pub k_pair: u128,
    /// Largest family of valid anchors with pairwise disjoint row sets.
    pub k_independent: u64,
}

fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    acc
}

struct Counter<'a> {
    grid: &'a [Treatment],
    n: usize,
    row: usize,
    cand_rows: Vec<usize>,
    r: usize,
    c: usize,
    budget: u64,
    nodes: u64,
    /// Row subsets with at least `c` jointly valid columns, and their column counts.
    valid: Vec<(Vec<usize>, u64)>,
}

impl Counter<'_> {
    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget(format!("anchor enumeration exceeded {} nodes", self.budget)));
        }
        Ok(())
    }

    fn rows_dfs(&mut self, start: usize, chosen: &mut Vec<usize>, cols: &[usize]) -> Result<()> {
        self.tick()?;
        if cols.len() < self.c {
            return Ok(());
        }
        if chosen.len() == self.r {
            self.valid.push((chosen.clone(), cols.len() as u64));
            return Ok(());
        }
        let need = self.r - chosen.len();
        if self.cand_rows.len() < start + need {
            return Ok(());
        }
        for k in start..=self.cand_rows.len() - need {
            let a = self.cand_rows[k];
            let next: Vec<usize> = cols
                .iter()
                .copied()
                .filter(|&b| self.grid[a * self.n + b] == self.grid[self.row * self.n + b])
                .collect();
            chosen.push(a);
            self.rows_dfs(k + 1, chosen, &next)?;
            chosen.pop();
        }
        Ok(())
    }
}

/// Enumerates the valid anchors of shape `(inst.r, inst.c)` for entry
/// `(row, col)` at `inst.level` on a row-major label grid.
pub fn count_anchors_exact(
    inst: &TheoryInstance,
    grid: &[Treatment],
    row: usize,
    col: usize,
    kind: EstimatorKind,
    budget: u64,
) -> Result<AnchorCounts> {
    inst.validate()?;
    let (m, n) = (inst.m, inst.n);
    if grid.len() != m * n || row >= m || col >= n {
        return Err(Error::Domain("grid does not match the instance".into()));
    }
    let d = inst.level;
    let cand_rows: Vec<usize> = (0..m).filter(|&a| a != row && grid[a * n + col] == d).collect();
    let cand_cols: Vec<usize> = (0..n)
        .filter(|&b| {
            let t = grid[row * n + b];
            b != col
                && match kind {
                    EstimatorKind::Snn => t == d,
                    EstimatorKind::Msnn => t.is_observed(),
                }
        })
        .collect();
    let mut counter = Counter {
        grid,
        n,
        row,
        cand_rows,
        r: inst.r,
        c: inst.c,
        budget,
        nodes: 0,
        valid: Vec::new(),
    };
    counter.rows_dfs(0, &mut Vec::new(), &cand_cols)?;

    let valid = std::mem::take(&mut counter.valid);
    let sizes: Vec<u128> = valid.iter().map(|(_, t)| choose(*t, inst.c as u64)).collect();
    let k_prime: u128 = sizes.iter().sum();

    let pairs = (valid.len() as u64).saturating_mul(valid.len() as u64);
    if pairs > budget.saturating_sub(counter.nodes) {
        return Err(Error::Budget(format!("{} valid row sets exceed the pair budget", valid.len())));
    }
    let mut k_pair: u128 = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    for x in 0..valid.len() {
        for y in x + 1..valid.len() {
            if intersects(&valid[x].0, &valid[y].0) {
                k_pair += sizes[x] * sizes[y];
            }
        }
    }

    let row_sets: Vec<&[usize]> = valid.iter().map(|(rows, _)| rows.as_slice()).collect();
    let k_independent = max_disjoint(&row_sets, m, budget.saturating_sub(counter.nodes + pairs))?;
    Ok(AnchorCounts {
        k_prime,
        k_pair,
        k_independent,
    })
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
        }
    }
    false
}

/// Maximum number of pairwise disjoint sets (all of equal size), by branch
/// and bound.
fn max_disjoint(sets: &[&[usize]], universe: usize, budget: u64) -> Result<u64> {
    if sets.is_empty() {
        return Ok(0);
    }
    let size = sets[0].len().max(1);
    struct Search<'a> {
        sets: &'a [&'a [usize]],
        size: usize,
        used: Vec<bool>,
        best: u64,
        nodes: u64,
        budget: u64,
    }
    impl Search<'_> {
        fn go(&mut self, start: usize, taken: u64) -> Result<()> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::Budget("disjoint anchor packing exceeded its node budget".into()));
            }
            self.best = self.best.max(taken);
            let mut free = 0;
            let mut seen = vec![false; self.used.len()];
            for s in &self.sets[start..] {
                if s.iter().all(|&a| !self.used[a]) {
                    for &a in s.iter() {
                        if !seen[a] {
                            seen[a] = true;
                            free += 1;
                        }
                    }
                }
            }
            if taken + (free / self.size) as u64 <= self.best {
                return Ok(());
            }
            for k in start..self.sets.len() {
                let s = self.sets[k];
                if s.iter().any(|&a| self.used[a]) {
                    continue;
                }
                for &a in s {
                    self.used[a] = true;
                }
                self.go(k + 1, taken + 1)?;
                for &a in s {
                    self.used[a] = false;
                }
            }
            Ok(())
        }
    }
    let mut search = Search {
        sets,
        size,
        used: vec![false; universe],
        best: 0,
        nodes: 0,
        budget,
    };
    search.go(0, 0)?;
    Ok(search.best)
}

/// Mean and standard error of one counted quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moment {
    pub mean: f64,
    pub se: f64,
}

impl Moment {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Moment {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

/// Monte Carlo summary of the anchor counts for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub estimator: EstimatorKind,
    pub replicates: usize,
    pub k_prime: Moment,
    pub k_pair: Moment,
    pub k_independent: Moment,
    /// `P(K ≥ 1)`, with `K` the disjoint-family size.
    pub k_geq_1: Moment,
    pub closed_form: LogValue,
    /// `|mean K' − closed form| ≤ 3 SE`.
    pub linearity_ok: bool,
    /// Every draw had `K_independent ≤ K'`, and the mean disjoint count lies
    /// in the Caro–Wei band.
    pub sandwich_ok: bool,
    /// `E[K]/max K ≤ P(K ≥ 1) ≤ E[K]` on the sample.
    pub probability_ok: bool,
}

/// Paired SNN and MSNN summaries over the same MCAR draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloStudy {
    pub instance: TheoryInstance,
    pub seed: u64,
    pub snn: CountReport,
    pub msnn: CountReport,
    /// `mean K'_MSNN / mean K'_SNN`.
    pub ratio: f64,
    /// Delta-method SE of `ratio`, including the covariance of the paired draws.
    pub ratio_se: f64,
    /// Draws with `K'_MSNN < K'_SNN`.
    pub dominance_violations: usize,
}

/// Draws an MCAR label grid for replicate `rep`.
pub fn draw_mcar_grid(inst: &TheoryInstance, seed: u64, rep: u64) -> Vec<Treatment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let probs = inst.mcar_probs();
    (0..inst.m * inst.n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Treatment(k as u16);
                }
            }
            Treatment(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u16)
        })
        .collect()
}

/// Counts anchors for entry `(0, 0)` on `replicates` independent MCAR grids.
pub fn monte_carlo_expectations(inst: &TheoryInstance, replicates: usize, seed: u64, budget: u64) -> Result<MonteCarloStudy> {
    inst.validate()?;
    if replicates == 0 {
        return Err(Error::Config("replicates must be >= 1".into()));
    }
    let draws: Vec<(AnchorCounts, AnchorCounts)> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let grid = draw_mcar_grid(inst, seed, rep as u64);
            let snn = count_anchors_exact(inst, &grid, 0, 0, EstimatorKind::Snn, budget);
            let msnn = count_anchors_exact(inst, &grid, 0, 0, EstimatorKind::Msnn, budget);
            match (snn, msnn) {
                (Ok(a), Ok(b)) => Ok((a, b)),
                (Err(e), _) | (_, Err(e)) => Err(Error::Replicate {
                    replicate: rep,
                    source: Box::new(e),
                }),
            }
        })
        .collect::<Result<_>>()?;
    let snn_counts: Vec<AnchorCounts> = draws.iter().map(|d| d.0).collect();
    let msnn_counts: Vec<AnchorCounts> = draws.iter().map(|d| d.1).collect();
    let snn = summarize(inst, EstimatorKind::Snn, &snn_counts);
    let msnn = summarize(inst, EstimatorKind::Msnn, &msnn_counts);

    let xs: Vec<f64> = msnn_counts.iter().map(|c| c.k_prime as f64).collect();
    let ys: Vec<f64> = snn_counts.iter().map(|c| c.k_prime as f64).collect();
    let (ratio, ratio_se) = ratio_with_se(&xs, &ys);
    let dominance_violations = draws.iter().filter(|(s, m)| m.k_prime < s.k_prime).count();
    Ok(MonteCarloStudy {
        instance: inst.clone(),
        seed,
        snn,
        msnn,
        ratio,
        ratio_se,
        dominance_violations,
    })
}

/// `mean(x) / mean(y)` with the first-order SE
/// `R sqrt(Var x̄ / x̄² + Var ȳ / ȳ² − 2 Cov(x̄, ȳ) / (x̄ ȳ))`.
pub fn ratio_with_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
        cxy += (x - mx) * (y - my);
    }
    let denom = (n - 1.0).max(1.0) * n;
    let (vx, vy, cxy) = (vx / denom, vy / denom, cxy / denom);
    let ratio = mx / my;
    let rel = vx / (mx * mx) + vy / (my * my) - 2.0 * cxy / (mx * my);
    (ratio, ratio * rel.max(0.0).sqrt())
}

fn summarize(inst: &TheoryInstance, kind: EstimatorKind, counts: &[AnchorCounts]) -> CountReport {
    let kp: Vec<f64> = counts.iter().map(|c| c.k_prime as f64).collect();
    let kpair: Vec<f64> = counts.iter().map(|c| c.k_pair as f64).collect();
    let kind_: Vec<f64> = counts.iter().map(|c| c.k_independent as f64).collect();
    let ge1: Vec<f64> = counts.iter().map(|c| f64::from(u8::from(c.k_independent >= 1))).collect();
    let (k_prime, k_pair, k_independent, k_geq_1) = (Moment::of(&kp), Moment::of(&kpair), Moment::of(&kind_), Moment::of(&ge1));
    let closed_form = expected_k_closed_form(inst, kind);
    let linearity_ok = (k_prime.mean - closed_form.value).abs() <= 3.0 * k_prime.se;

    let per_draw = counts.iter().all(|c| u128::from(c.k_independent) <= c.k_prime);
    let lower = if k_prime.mean > 0.0 {
        k_prime.mean / (1.0 + 2.0 * k_pair.mean / k_prime.mean)
    } else {
        0.0
    };
    let band = k_independent.mean >= lower - 3.0 * k_independent.se && k_independent.mean <= k_prime.mean + 3.0 * k_prime.se;
    let max_k = counts.iter().map(|c| c.k_independent).max().unwrap_or(0) as f64;
    let probability_ok = max_k == 0.0
        || (k_independent.mean / max_k <= k_geq_1.mean + 1e-12 && k_geq_1.mean <= k_independent.mean + 1e-12);
    CountReport {
        estimator: kind,
        replicates: counts.len(),
        k_prime,
        k_pair,
        k_independent,
        k_geq_1,
        closed_form,
        linearity_ok,
        sandwich_ok: per_draw && band,
        probability_ok,
    }
}

/// Header of [`count_report_csv_row`].
pub const COUNT_REPORT_HEADER: &str = "estimator,m,n,r,c,level,probs,replicates,closed_form,closed_form_overflow,\
k_prime_mean,k_prime_se,k_pair_mean,k_pair_se,k_independent_mean,k_independent_se,k_geq_1,k_geq_1_se,\
linearity_ok,sandwich_ok,probability_ok";

pub fn count_report_csv_row(inst: &TheoryInstance, rep: &CountReport) -> String {
    let probs: Vec<String> = inst.probs.iter().map(|p| p.to_string()).collect();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        rep.estimator,
        inst.m,
        inst.n,
        inst.r,
        inst.c,
        inst.level,
        probs.join(";"),
        rep.replicates,
        rep.closed_form.value,
        rep.closed_form.overflow,
        rep.k_prime.mean,
        rep.k_prime.se,
        rep.k_pair.mean,
        rep.k_pair.se,
        rep.k_independent.mean,
        rep.k_independent.se,
        rep.k_geq_1.mean,
        rep.k_geq_1.se,
        rep.linearity_ok,
        rep.sandwich_ok,
        rep.probability_ok
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(&[0.3], 3), 1.0);
        assert_eq!(gamma(&[0.2, 0.2], 2), 2.0);
        let g = gamma(&[0.01, 0.025, 0.05, 0.8], 3);
        let direct = 1.0 + 0.0625f64.powi(4) + 0.03125f64.powi(4) + 0.0125f64.powi(4);
        assert_relative_eq!(g, direct, epsilon = 1e-15);
        assert!((g - 1.0000163).abs() < 1e-6);
    }

    #[test]
    fn closed_forms() {
        let inst = TheoryInstance::new(3, 3, 1, 1, vec![0.5], 1).unwrap();
        assert_relative_eq!(expected_k_closed_form(&inst, EstimatorKind::Snn).value, 0.5, epsilon = 1e-12);
        assert_relative_eq!(expected_k_closed_form(&inst, EstimatorKind::Msnn).value, 0.5, epsilon = 1e-12);
        let big = TheoryInstance::new(300, 100, 3, 2, vec![0.01, 0.025, 0.05, 0.8], 1).unwrap();
        let ratios = efficiency_ratios(&big);
        let expect = (1.0 + 2.5f64.powi(4) + 5f64.powi(4) + 80f64.powi(4)).powi(2);
        assert_relative_eq!(ratios.msnn_over_snn.value, expect, max_relative = 1e-12);
        assert!((ratios.msnn_over_snn.value / 1.678e15 - 1.0).abs() < 1e-3);
        let snn = expected_k_closed_form(&big, EstimatorKind::Snn);
        let msnn = expected_k_closed_form(&big, EstimatorKind::Msnn);
        assert_relative_eq!(msnn.value / snn.value, expect, max_relative = 1e-9);
    }

    #[test]
    fn exact_counts_full_grid() {
        let inst = TheoryInstance::new(4, 4, 1, 1, vec![1.0], 1).unwrap();
        let grid = vec![Treatment(1); 16];
        let c = count_anchors_exact(&inst, &grid, 0, 0, EstimatorKind::Snn, DEFAULT_COUNT_BUDGET).unwrap();
        assert_eq!(c.k_prime, 9);
        // Three rows, each carrying three single-column anchors.
        assert_eq!(c.k_independent, 3);
        assert_eq!(c.k_pair, 3 * 3);
        let empty = vec![Treatment(0); 16];
        let c = count_anchors_exact(&inst, &empty, 0, 0, EstimatorKind::Msnn, DEFAULT_COUNT_BUDGET).unwrap();
        assert_eq!(c, AnchorCounts { k_prime: 0, k_pair: 0, k_independent: 0 });
    }

    #[test]
    fn single_level_ratios_are_one() {
        let inst = TheoryInstance::new(10, 10, 2, 2, vec![0.4], 1).unwrap();
        let r = efficiency_ratios(&inst);
        assert_relative_eq!(r.msnn_over_snn.value, 1.0);
        assert_relative_eq!(r.msnn_d_over_msnn_dmax.value, 1.0);
        // SNN(d_max) and MSNN(d_max) coincide when there is one level.
        assert_relative_eq!(r.snn_d_over_msnn_dmax.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(choose(5, 2), 10);
        assert_eq!(choose(2, 3), 0);
        assert_eq!(choose(40, 20), 137846528820);
    }
}

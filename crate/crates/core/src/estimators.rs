//! SNN and MSNN entry estimators, per-level weights, feasibility gates and
//! plug-in confidence intervals.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::anchors::{find_anchor, partition_subgroups, AnchorMode, AnchorSet, BicliqueMode, SubgroupPlan};
use crate::error::{Error, Result};
use crate::panel::{EntryQuery, ObservedPanel, Treatment};
use crate::spectral::{beta_from_factors, condition_from_spectrum, residual_onto_basis, RankChoice, RankRule, SvdFactors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Snn,
    Msnn,
}

impl EstimatorKind {
    pub fn anchor_mode(self) -> AnchorMode {
        match self {
            EstimatorKind::Snn => AnchorMode::Strict,
            EstimatorKind::Msnn => AnchorMode::Mixed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Snn => "SNN",
            EstimatorKind::Msnn => "MSNN",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where per-level weights come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    /// `1 / f(d)` from the generating model.
    Oracle,
    /// `1 / max |Ỹ|` over the entries observed at each level.
    #[serde(rename = "estimated")]
    EstimatedMaxAbs,
    Unit,
}

impl FromStr for WeightSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(WeightSource::Oracle),
            "estimated" => Ok(WeightSource::EstimatedMaxAbs),
            "unit" => Ok(WeightSource::Unit),
            _ => Err(Error::Config(format!("unknown weight source {s:?}"))),
        }
    }
}

impl fmt::Display for WeightSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightSource::Oracle => "oracle",
            WeightSource::EstimatedMaxAbs => "estimated",
            WeightSource::Unit => "unit",
        })
    }
}

/// Positive weight per nonzero treatment level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightFunction {
    /// `weights[d - 1] = w(d)`.
    pub weights: Vec<f64>,
    pub source: WeightSource,
    /// Levels that fell back to unit weight.
    pub warnings: Vec<String>,
}

impl WeightFunction {
    pub fn unit(levels: u16) -> Self {
        WeightFunction {
            weights: vec![1.0; levels as usize],
            source: WeightSource::Unit,
            warnings: Vec::new(),
        }
    }

    /// `w(d) = 1 / f(d)`.
    pub fn oracle(scales: &[f64]) -> Result<Self> {
        if scales.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Config("oracle scales must be positive and finite".into()));
        }
        Ok(WeightFunction {
            weights: scales.iter().map(|f| 1.0 / f).collect(),
            source: WeightSource::Oracle,
            warnings: Vec::new(),
        })
    }

    pub fn get(&self, level: Treatment) -> Result<f64> {
        let w = level
            .index()
            .checked_sub(1)
            .and_then(|k| self.weights.get(k))
            .copied()
            .ok_or_else(|| Error::Config(format!("no weight for treatment level {level}")))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Config(format!("weight for level {level} is not positive: {w}")));
        }
        Ok(w)
    }
}

/// `w(d) = 1 / max_{D_ij = d} |Ỹ_ij|`; levels with no observations or an
/// all-zero maximum get weight 1 and a warning.
pub fn estimate_weights(panel: &ObservedPanel) -> WeightFunction {
    let levels = panel.levels() as usize;
    let mut max_abs = vec![0.0f64; levels];
    let mut seen = vec![false; levels];
    for i in 0..panel.rows() {
        for j in 0..panel.cols() {
            let t = panel.treatment(i, j);
            if t.is_observed() {
                let k = t.index() - 1;
                seen[k] = true;
                max_abs[k] = max_abs[k].max(panel.observed_unchecked(i, j).abs());
            }
        }
    }
    let mut warnings = Vec::new();
    let weights = (0..levels)
        .map(|k| {
            if !seen[k] {
                warnings.push(format!("level {} has no observed entries; using unit weight", k + 1));
                1.0
            } else if !(max_abs[k] > 0.0 && max_abs[k].is_finite()) {
                warnings.push(format!("level {} has zero maximum |Y|; using unit weight", k + 1));
                1.0
            } else {
                1.0 / max_abs[k]
            }
        })
        .collect();
    WeightFunction {
        weights,
        source: WeightSource::EstimatedMaxAbs,
        warnings,
    }
}

/// Subspace-residual tolerances and the minimum anchor shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityPolicy {
    pub x_tol: f64,
    pub q_tol: f64,
    pub min_rows: usize,
    pub min_cols: usize,
}

impl Default for FeasibilityPolicy {
    fn default() -> Self {
        FeasibilityPolicy {
            x_tol: 0.1,
            q_tol: 0.1,
            min_rows: 2,
            min_cols: 2,
        }
    }
}

impl FeasibilityPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("x_tol", self.x_tol), ("q_tol", self.q_tol)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("{name} = {t} must lie in (0, 1]")));
            }
        }
        if self.min_rows == 0 || self.min_cols == 0 {
            return Err(Error::Config("minimum anchor shape must be at least 1x1".into()));
        }
        Ok(())
    }
}

/// Outcome of the feasibility gates for one subgroup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub pass: bool,
    pub residual_x: f64,
    pub residual_q: f64,
    pub rank: usize,
    /// A fixed rank larger than the anchor allows was requested.
    pub clipped: bool,
    pub shape_ok: bool,
}

/// Checks `x ∈ col(S_λ)`, `q ∈ row(S_λ)` and the minimum shape.
///
/// A fixed rank rule that had to be clipped to the anchor shape fails: the
/// anchor is too small to carry the requested number of factors.
pub fn feasibility_check(
    s_w: &DMatrix<f64>,
    q_w: &DVector<f64>,
    x: &DVector<f64>,
    rule: RankRule,
    policy: &FeasibilityPolicy,
) -> Feasibility {
    let f = SvdFactors::compute(s_w);
    let choice = rule.select(&f.singular_values);
    feasibility_from_factors(&f, choice, q_w, x, policy)
}

fn feasibility_from_factors(
    f: &SvdFactors,
    choice: RankChoice,
    q_w: &DVector<f64>,
    x: &DVector<f64>,
    policy: &FeasibilityPolicy,
) -> Feasibility {
    let (r, c) = (f.left.nrows(), f.right.nrows());
    let residual_x = residual_onto_basis(x, &f.left, choice.rank);
    let residual_q = residual_onto_basis(q_w, &f.right, choice.rank);
    let shape_ok = r >= policy.min_rows && c >= policy.min_cols;
    Feasibility {
        pass: shape_ok
            && !choice.clipped
            && f.largest() > 0.0
            && residual_x <= policy.x_tol
            && residual_q <= policy.q_tol,
        residual_x,
        residual_q,
        rank: choice.rank,
        clipped: choice.clipped,
        shape_ok,
    }
}

/// Per-subgroup fit and gate results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupDiagnostics {
    pub shape: (usize, usize),
    pub rank: usize,
    pub clipped: bool,
    pub residual_x: f64,
    pub residual_q: f64,
    pub condition: f64,
    pub estimate: f64,
    pub passed: bool,
    pub beta: Vec<f64>,
    /// Plug-in noise std of the target level, `None` without residual degrees of freedom.
    pub residual_sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// One estimated entry. `estimate` is present iff at least one subgroup
/// passed every gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub query: EntryQuery,
    pub estimator: EstimatorKind,
    pub estimate: Option<f64>,
    pub k_used: usize,
    pub anchor_shape: Option<(usize, usize)>,
    pub subgroups: Vec<SubgroupDiagnostics>,
    pub reason: Option<String>,
    pub ci: Option<ConfidenceInterval>,
}

impl EstimateRecord {
    pub fn infeasible(query: EntryQuery, estimator: EstimatorKind, reason: impl Into<String>) -> Self {
        EstimateRecord {
            query,
            estimator,
            estimate: None,
            k_used: 0,
            anchor_shape: None,
            subgroups: Vec::new(),
            reason: Some(reason.into()),
            ci: None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.estimate.is_some()
    }
}

/// Strict-mode estimator: every anchor column is at the target level and no
/// weighting is applied.
pub fn snn_estimate(
    panel: &ObservedPanel,
    query: &EntryQuery,
    plan: &SubgroupPlan,
    rule: RankRule,
    policy: &FeasibilityPolicy,
) -> Result<EstimateRecord> {
    if plan.mode().is_some_and(|m| m != AnchorMode::Strict) {
        return Err(Error::Usage("SNN needs a plan built in strict mode".into()));
    }
    estimate_with_plan(panel, query, plan, EstimatorKind::Snn, None, rule, policy)
}

/// Mixed-mode estimator: anchor column `b` is scaled by `w(d(b))` in both
/// `S` and `q`; `x` stays unweighted at the target level.
pub fn msnn_estimate(
    panel: &ObservedPanel,
    query: &EntryQuery,
    plan: &SubgroupPlan,
    weights: &WeightFunction,
    rule: RankRule,
    policy: &FeasibilityPolicy,
) -> Result<EstimateRecord> {
    if plan.mode().is_some_and(|m| m != AnchorMode::Mixed) {
        return Err(Error::Usage("MSNN needs a plan built in mixed mode".into()));
    }
    estimate_with_plan(panel, query, plan, EstimatorKind::Msnn, Some(weights), rule, policy)
}

fn estimate_with_plan(
    panel: &ObservedPanel,
    query: &EntryQuery,
    plan: &SubgroupPlan,
    kind: EstimatorKind,
    weights: Option<&WeightFunction>,
    rule: RankRule,
    policy: &FeasibilityPolicy,
) -> Result<EstimateRecord> {
    panel.check_query(query)?;
    rule.validate()?;
    if plan.subgroups.is_empty() {
        return Ok(EstimateRecord::infeasible(*query, kind, "empty subgroup plan"));
    }
    let target_w = match weights {
        Some(w) => w.get(query.level)?,
        None => 1.0,
    };
    let mut subgroups = Vec::with_capacity(plan.subgroups.len());
    for anchor in &plan.subgroups {
        if anchor.query != *query {
            return Err(Error::Usage("subgroup plan was built for a different entry".into()));
        }
        let col_w = match weights {
            Some(w) => anchor.col_treatments.iter().map(|&t| w.get(t)).collect::<Result<Vec<_>>>()?,
            None => vec![1.0; anchor.cols.len()],
        };
        subgroups.push(fit_subgroup(panel, anchor, &col_w, target_w, rule, policy)?);
    }
    let passed: Vec<&SubgroupDiagnostics> = subgroups.iter().filter(|s| s.passed).collect();
    let k_used = passed.len();
    let estimate = (k_used > 0).then(|| passed.iter().map(|s| s.estimate).sum::<f64>() / k_used as f64);
    let reason = (k_used == 0).then(|| "no subgroup passed the feasibility gates".to_string());
    let shape = plan.subgroups.iter().fold((0, 0), |(r, _), s| (r + s.rows.len(), s.cols.len()));
    Ok(EstimateRecord {
        query: *query,
        estimator: kind,
        estimate,
        k_used,
        anchor_shape: Some(shape),
        subgroups,
        reason,
        ci: None,
    })
}

fn fit_subgroup(
    panel: &ObservedPanel,
    anchor: &AnchorSet,
    col_w: &[f64],
    target_w: f64,
    rule: RankRule,
    policy: &FeasibilityPolicy,
) -> Result<SubgroupDiagnostics> {
    let EntryQuery { row: i, col: j, .. } = anchor.query;
    let (r, c) = anchor.shape();
    let y = |a: usize, b: usize| panel.outcome(a, b);
    let mut s = DMatrix::zeros(r, c);
    for (ra, &a) in anchor.rows.iter().enumerate() {
        for (cb, &b) in anchor.cols.iter().enumerate() {
            s[(ra, cb)] = col_w[cb] * y(a, b)?;
        }
    }
    let mut q = DVector::zeros(c);
    for (cb, &b) in anchor.cols.iter().enumerate() {
        q[cb] = col_w[cb] * y(i, b)?;
    }
    let mut x = DVector::zeros(r);
    for (ra, &a) in anchor.rows.iter().enumerate() {
        x[ra] = y(a, j)?;
    }

    let factors = SvdFactors::compute(&s);
    let condition = condition_from_spectrum(&factors.singular_values);
    let fit = match beta_from_factors(factors, &q, rule) {
        Ok(fit) => fit,
        Err(Error::Degenerate(_)) => {
            return Ok(SubgroupDiagnostics {
                shape: (r, c),
                rank: 0,
                clipped: false,
                residual_x: f64::NAN,
                residual_q: f64::NAN,
                condition,
                estimate: f64::NAN,
                passed: false,
                beta: vec![0.0; r],
                residual_sd: None,
            })
        }
        Err(e) => return Err(e),
    };
    let gate = feasibility_from_factors(&fit.factors, fit.rank, &q, &x, policy);
    let estimate = x.dot(&fit.beta);
    let dof = c.saturating_sub(fit.rank.rank);
    let residual_sd = (dof > 0).then(|| {
        let resid = &q - s.transpose() * &fit.beta;
        (resid.norm_squared() / dof as f64).sqrt() / target_w
    });
    Ok(SubgroupDiagnostics {
        shape: (r, c),
        rank: fit.rank.rank,
        clipped: fit.rank.clipped,
        residual_x: gate.residual_x,
        residual_q: gate.residual_q,
        condition,
        estimate,
        passed: gate.pass && estimate.is_finite(),
        beta: fit.beta.iter().copied().collect(),
        residual_sd,
    })
}

/// `z_{(1+level)/2}`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} must lie in (0, 1)")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

/// `z · sqrt(Σ_k σ̃_k²) / K` for per-subgroup variances `σ̃_k² = Σ_l (β_kl σ_k)²`.
pub fn ci_half_width(subgroup_variances: &[f64], level: f64) -> Result<f64> {
    let z = normal_quantile(level)?;
    let k = subgroup_variances.len() as f64;
    Ok(z * subgroup_variances.iter().sum::<f64>().sqrt() / k)
}

/// Plug-in normal interval over the subgroups that passed, using each
/// subgroup's residual standard deviation in place of the true noise level.
/// `None` when fewer than two subgroups passed or a residual sd is undefined.
pub fn plugin_ci(record: &EstimateRecord, level: f64) -> Result<Option<ConfidenceInterval>> {
    normal_quantile(level)?;
    let Some(est) = record.estimate else {
        return Ok(None);
    };
    if record.k_used < 2 {
        return Ok(None);
    }
    let mut variances = Vec::with_capacity(record.k_used);
    for s in record.subgroups.iter().filter(|s| s.passed) {
        let Some(sd) = s.residual_sd else {
            return Ok(None);
        };
        variances.push(s.beta.iter().map(|b| (b * sd).powi(2)).sum());
    }
    let half = ci_half_width(&variances, level)?;
    Ok(Some(ConfidenceInterval {
        lower: est - half,
        upper: est + half,
        level,
    }))
}

/// Settings shared by every query of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Number of row-disjoint subgroups.
    pub k: usize,
    pub rank_rule: RankRule,
    pub policy: FeasibilityPolicy,
    pub search: BicliqueMode,
    /// Base seed for the per-entry subgroup shuffles.
    pub seed: u64,
    /// Attach a plug-in interval at this level when possible.
    pub ci_level: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 1,
            rank_rule: RankRule::default(),
            policy: FeasibilityPolicy::default(),
            search: BicliqueMode::Greedy,
            seed: 0,
            ci_level: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        self.rank_rule.validate()?;
        self.policy.validate()?;
        if let Some(level) = self.ci_level {
            normal_quantile(level)?;
        }
        Ok(())
    }
}

/// Deterministic per-entry seed.
pub fn query_seed(seed: u64, q: &EntryQuery) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [q.row as u64, q.col as u64, q.level.0 as u64] {
        h = splitmix(h ^ v);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Indicator, biclique search, subgroup partition and estimation for one
/// entry. Missing anchors yield an infeasible record, not an error.
pub fn estimate_entry(
    panel: &ObservedPanel,
    query: &EntryQuery,
    kind: EstimatorKind,
    weights: Option<&WeightFunction>,
    cfg: &PipelineConfig,
) -> Result<EstimateRecord> {
    panel.check_query(query)?;
    let min_rows = cfg.policy.min_rows.max(1) * cfg.k;
    let anchor = find_anchor(panel, query, kind.anchor_mode(), min_rows, cfg.policy.min_cols.max(1), cfg.search)?;
    let Some(anchor) = anchor else {
        return Ok(EstimateRecord::infeasible(
            *query,
            kind,
            format!("no anchor of at least {min_rows}x{} found", cfg.policy.min_cols),
        ));
    };
    let plan = partition_subgroups(&anchor, cfg.k, query_seed(cfg.seed, query))?;
    let mut record = match kind {
        EstimatorKind::Snn => snn_estimate(panel, query, &plan, cfg.rank_rule, &cfg.policy)?,
        EstimatorKind::Msnn => {
            let w = weights.ok_or_else(|| Error::Config("MSNN requires a weight function".into()))?;
            msnn_estimate(panel, query, &plan, w, cfg.rank_rule, &cfg.policy)?
        }
    };
    if let Some(level) = cfg.ci_level {
        record.ci = plugin_ci(&record, level)?;
    }
    Ok(record)
}

/// Convenience default for strict and mixed searches in exact mode.
pub fn exact_search() -> BicliqueMode {
    BicliqueMode::exact()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn full_panel(m: usize, n: usize, level: u16, levels: u16, f: impl Fn(usize, usize) -> f64) -> ObservedPanel {
        let t = vec![Treatment(level); m * n];
        let y = (0..m * n).map(|k| f(k / n, k % n)).collect();
        ObservedPanel::new(m, n, levels, t, y).unwrap()
    }

    #[test]
    fn weights_from_panel() {
        let p = ObservedPanel::new(
            1,
            3,
            2,
            vec![Treatment(1), Treatment(1), Treatment(0)],
            vec![-3.0, 2.0, f64::NAN],
        )
        .unwrap();
        let w = estimate_weights(&p);
        assert_relative_eq!(w.weights[0], 1.0 / 3.0);
        assert_eq!(w.weights[1], 1.0);
        assert_eq!(w.warnings.len(), 1);
        let o = WeightFunction::oracle(&[1.0, 5.0, 25.0, 625.0]).unwrap();
        for (a, b) in o.weights.iter().zip([1.0, 0.2, 0.04, 0.0016]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(matches!(o.get(Treatment(5)), Err(Error::Config(_))));
    }

    #[test]
    fn rank_one_exact() {
        let u = [1.0, 2.0, -1.5, 0.5];
        let v = [0.3, -2.0, 1.0, 4.0, 2.5];
        let p = full_panel(4, 5, 1, 1, |i, j| u[i] * v[j]);
        let cfg = PipelineConfig {
            rank_rule: RankRule::Fixed(1),
            ..Default::default()
        };
        let q = EntryQuery::new(0, 0, 1);
        for kind in [EstimatorKind::Snn, EstimatorKind::Msnn] {
            let w = WeightFunction::unit(1);
            let rec = estimate_entry(&p, &q, kind, Some(&w), &cfg).unwrap();
            assert_relative_eq!(rec.estimate.unwrap(), u[0] * v[0], max_relative = 1e-8);
        }
    }

    #[test]
    fn one_by_one_is_infeasible() {
        let p = full_panel(2, 2, 1, 1, |i, j| (i + j) as f64 + 1.0);
        let cfg = PipelineConfig {
            policy: FeasibilityPolicy {
                min_rows: 1,
                min_cols: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let rec = estimate_entry(&p, &EntryQuery::new(0, 0, 1), EstimatorKind::Snn, None, &cfg).unwrap();
        assert!(rec.is_feasible());
        let strict = PipelineConfig::default();
        let rec = estimate_entry(&p, &EntryQuery::new(0, 0, 1), EstimatorKind::Snn, None, &strict).unwrap();
        assert!(!rec.is_feasible());
        assert!(rec.reason.is_some());
    }

    #[test]
    fn gates() {
        let s = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let policy = FeasibilityPolicy {
            min_rows: 1,
            min_cols: 1,
            ..Default::default()
        };
        let ok = feasibility_check(
            &s,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![1.0, 0.0, 0.0]),
            RankRule::Fixed(2),
            &policy,
        );
        assert!(ok.pass);
        assert_eq!((ok.residual_x, ok.residual_q), (0.0, 0.0));
        let bad = feasibility_check(
            &s,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![0.0, 0.0, 1.0]),
            RankRule::Fixed(2),
            &policy,
        );
        assert!(!bad.pass);
        assert_relative_eq!(bad.residual_x, 1.0);
        let clipped = feasibility_check(
            &s,
            &DVector::from_vec(vec![1.0, 0.0]),
            &DVector::from_vec(vec![1.0, 0.0, 0.0]),
            RankRule::Fixed(3),
            &policy,
        );
        assert!(clipped.clipped && !clipped.pass);
    }

    #[test]
    fn mode_mismatch_is_usage_error() {
        let p = full_panel(3, 3, 1, 1, |_, _| 1.0);
        let q = EntryQuery::new(0, 0, 1);
        let anchor = find_anchor(&p, &q, AnchorMode::Mixed, 2, 2, BicliqueMode::Greedy).unwrap().unwrap();
        let plan = partition_subgroups(&anchor, 1, 0).unwrap();
        let err = snn_estimate(&p, &q, &plan, RankRule::Fixed(1), &FeasibilityPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        let w = WeightFunction {
            weights: vec![],
            source: WeightSource::Unit,
            warnings: vec![],
        };
        let err = msnn_estimate(&p, &q, &plan, &w, RankRule::Fixed(1), &FeasibilityPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn half_width_arithmetic() {
        let z = normal_quantile(0.95).unwrap();
        assert_relative_eq!(z, 1.959963984540054, epsilon = 1e-9);
        let s = 0.3;
        let w = ci_half_width(&[s * s; 4], 0.95).unwrap();
        assert_relative_eq!(w, 2.0 * z * s / 4.0, epsilon = 1e-14);
        assert!(normal_quantile(1.0).is_err());
    }
}

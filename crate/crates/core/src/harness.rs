//! Experiment driver: replicated simulation studies with feasibility-rate and
//! relative-error tables, estimation on ingested panels, and report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{BicliqueMode, DEFAULT_EXACT_BUDGET};
use crate::datagen::{simulate_panel, AssignmentMechanism, LatentModel, ModelParams};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_entry, estimate_weights, EstimateRecord, EstimatorKind, FeasibilityPolicy, PipelineConfig, WeightFunction,
    WeightSource,
};
use crate::panel::{observed_fraction, EntryQuery, ObservedPanel, Treatment};
use crate::spectral::RankRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorSelection {
    Snn,
    Msnn,
    Both,
}

impl EstimatorSelection {
    pub fn kinds(self) -> Vec<EstimatorKind> {
        match self {
            EstimatorSelection::Snn => vec![EstimatorKind::Snn],
            EstimatorSelection::Msnn => vec![EstimatorKind::Msnn],
            EstimatorSelection::Both => vec![EstimatorKind::Snn, EstimatorKind::Msnn],
        }
    }
}

/// Which per-entry records are kept in the estimate dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpPolicy {
    #[default]
    None,
    Feasible,
    All,
}

impl DumpPolicy {
    fn keeps(self, rec: &EstimateRecord) -> bool {
        match self {
            DumpPolicy::None => false,
            DumpPolicy::Feasible => rec.is_feasible(),
            DumpPolicy::All => true,
        }
    }
}

fn default_replicates() -> usize {
    10
}
fn default_k() -> usize {
    1
}
fn default_levels() -> Vec<u16> {
    vec![1, 2, 3]
}
fn default_budget() -> u64 {
    DEFAULT_EXACT_BUDGET
}
fn default_weights() -> WeightSource {
    WeightSource::Oracle
}
fn default_estimators() -> EstimatorSelection {
    EstimatorSelection::Both
}

/// A replicated simulation study. Every field has a default reproducing the
/// four-level MCAR benchmark, so an empty TOML file is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "ModelParams::four_level_benchmark")]
    pub model: ModelParams,
    #[serde(default = "AssignmentMechanism::benchmark_mcar")]
    pub assignment: AssignmentMechanism,
    #[serde(default = "default_estimators")]
    pub estimators: EstimatorSelection,
    /// Target levels scored in the tables.
    #[serde(default = "default_levels")]
    pub levels: Vec<u16>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub rank_rule: RankRule,
    #[serde(default)]
    pub policy: FeasibilityPolicy,
    #[serde(default = "default_weights")]
    pub weights: WeightSource,
    #[serde(default)]
    pub exact_biclique: bool,
    #[serde(default = "default_budget")]
    pub exact_budget: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ci_level: Option<f64>,
    #[serde(default)]
    pub dump: DumpPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    /// Named setups: `mcar`, `mnar-0.05`, `mnar-0.02`, `zero-noise`.
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        match name {
            "mcar" => {}
            "zero-noise" => {
                cfg.model.sigma_rel = 0.0;
                cfg.rank_rule = RankRule::Fixed(cfg.model.rank);
            }
            "mnar-0.05" | "mnar-0.02" => {
                cfg.model.abs_outcomes = true;
                cfg.assignment = AssignmentMechanism::MnarSoftmax {
                    lambda: if name == "mnar-0.05" { 0.05 } else { 0.02 },
                    thinning: 0.0,
                };
            }
            _ => return Err(Error::Config(format!("unknown preset {name:?}"))),
        }
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Domain(msg) => Error::Config(msg),
            other => other,
        };
        self.model.validate().map_err(cfg)?;
        self.assignment.validate(self.model.levels()).map_err(cfg)?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("no target levels".into()));
        }
        if let Some(&bad) = self.levels.iter().find(|&&d| d == 0 || d as usize > self.model.levels()) {
            return Err(Error::Config(format!(
                "target level {bad} outside 1..={}",
                self.model.levels()
            )));
        }
        if matches!(self.assignment, AssignmentMechanism::MnarSoftmax { .. }) && !self.model.abs_outcomes {
            return Err(Error::Config("softmax assignment requires model.abs_outcomes = true".into()));
        }
        self.pipeline(0).validate()
    }

    pub fn search(&self) -> BicliqueMode {
        if self.exact_biclique {
            BicliqueMode::Exact {
                budget: self.exact_budget,
            }
        } else {
            BicliqueMode::Greedy
        }
    }

    fn pipeline(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            rank_rule: self.rank_rule,
            policy: self.policy,
            search: self.search(),
            seed,
            ci_level: self.ci_level,
        }
    }
}

/// Seeds of one replicate, derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicateSeeds {
    pub model: u64,
    pub assignment: u64,
    pub noise: u64,
    pub pipeline: u64,
}

pub fn replicate_seeds(seed: u64, replicate: usize) -> ReplicateSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    ReplicateSeeds {
        model: rng.random(),
        assignment: rng.random(),
        noise: rng.random(),
        pipeline: rng.random(),
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Scores of one estimator at one level on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub level: u16,
    /// Share of entries observed at `level`.
    pub proportion: f64,
    pub feasible: usize,
    pub entries: usize,
    /// Percent of the `m n` entries with a feasible estimate.
    pub fr: f64,
    /// Mean `|(Â − A) / A|` over feasible entries; NaN when none.
    pub mre: f64,
    /// Share of feasible entries whose interval covers `A`; NaN without intervals.
    pub ci_coverage: f64,
}

/// Mean and sample standard deviation over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: EstimatorKind,
    pub level: u16,
    pub proportion: f64,
    pub fr_mean: f64,
    pub fr_std: f64,
    pub mre_mean: f64,
    pub mre_std: f64,
    pub replicates: usize,
    /// Replicates with at least one feasible entry (the MRE sample size).
    pub mre_replicates: usize,
}

/// One estimated entry in the dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub replicate: Option<usize>,
    pub estimator: EstimatorKind,
    pub row: usize,
    pub col: usize,
    pub row_id: String,
    pub col_id: String,
    pub level: u16,
    pub feasible: bool,
    pub estimate: Option<f64>,
    pub truth: Option<f64>,
    pub relative_error: Option<f64>,
    /// Outcome observed at the target level, when the target is an observed entry.
    pub observed: Option<f64>,
    /// `|Â − Ỹ| / |Ỹ|` for observed targets.
    pub validation_residual: Option<f64>,
    pub k_used: usize,
    pub anchor_rows: usize,
    pub anchor_cols: usize,
    pub rank: usize,
    pub residual_x: f64,
    pub residual_q: f64,
    pub condition: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub reason: Option<String>,
}

impl EstimateRow {
    pub fn from_record(rec: &EstimateRecord, panel: &ObservedPanel, replicate: Option<usize>, truth: Option<f64>) -> Self {
        let q = rec.query;
        let observed = (panel.treatment(q.row, q.col) == q.level).then(|| panel.outcome(q.row, q.col).ok()).flatten();
        let rel = |est: f64, reference: f64| (est - reference).abs() / reference.abs();
        let worst = |f: fn(&crate::estimators::SubgroupDiagnostics) -> f64| {
            rec.subgroups.iter().map(f).fold(f64::NAN, f64::max)
        };
        EstimateRow {
            replicate,
            estimator: rec.estimator,
            row: q.row,
            col: q.col,
            row_id: panel.row_ids()[q.row].clone(),
            col_id: panel.col_ids()[q.col].clone(),
            level: q.level.0,
            feasible: rec.is_feasible(),
            estimate: rec.estimate,
            truth,
            relative_error: rec.estimate.zip(truth).map(|(e, a)| rel(e, a)),
            observed,
            validation_residual: rec.estimate.zip(observed).map(|(e, y)| rel(e, y)),
            k_used: rec.k_used,
            anchor_rows: rec.anchor_shape.map_or(0, |s| s.0),
            anchor_cols: rec.anchor_shape.map_or(0, |s| s.1),
            rank: rec.subgroups.iter().map(|s| s.rank).max().unwrap_or(0),
            residual_x: worst(|s| s.residual_x),
            residual_q: worst(|s| s.residual_q),
            condition: worst(|s| s.condition),
            ci_lower: rec.ci.map(|c| c.lower),
            ci_upper: rec.ci.map(|c| c.upper),
            reason: rec.reason.clone(),
        }
    }
}

/// Output of a simulation study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub metrics: Vec<MetricsRow>,
    pub replicates: Vec<ReplicateMetrics>,
    pub dump: Vec<EstimateRow>,
    /// Replicate-level pairs where the MSNN feasible rate fell below SNN's.
    pub dominance_violations: usize,
}

/// Generates, estimates and scores every replicate of `cfg`.
pub fn run_simulation_study(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let mut replicates = Vec::new();
    let mut dump = Vec::new();
    for rep in 0..cfg.replicates {
        let (metrics, rows) = run_replicate(cfg, rep).map_err(|e| Error::Replicate {
            replicate: rep,
            source: Box::new(e),
        })?;
        replicates.extend(metrics);
        dump.extend(rows);
    }
    let dominance_violations = count_dominance_violations(&replicates);
    Ok(StudyOutput {
        metrics: aggregate(&replicates),
        replicates,
        dump,
        dominance_violations,
    })
}

fn count_dominance_violations(reps: &[ReplicateMetrics]) -> usize {
    reps.iter()
        .filter(|s| s.estimator == EstimatorKind::Snn)
        .filter(|s| {
            reps.iter().any(|m| {
                m.estimator == EstimatorKind::Msnn && m.replicate == s.replicate && m.level == s.level && m.feasible < s.feasible
            })
        })
        .count()
}

/// One replicate of `cfg`: the scored metrics and the kept dump rows.
pub fn run_replicate(cfg: &ExperimentConfig, rep: usize) -> Result<(Vec<ReplicateMetrics>, Vec<EstimateRow>)> {
    let seeds = replicate_seeds(cfg.seed, rep);
    let model = LatentModel::generate(cfg.model.clone(), seeds.model)?;
    let panel = simulate_panel(&model, &cfg.assignment, seeds.assignment, seeds.noise)?;
    let weights = match cfg.weights {
        WeightSource::Oracle => WeightFunction::oracle(&cfg.model.scales)?,
        WeightSource::EstimatedMaxAbs => estimate_weights(&panel),
        WeightSource::Unit => WeightFunction::unit(panel.levels()),
    };
    let pipeline = cfg.pipeline(seeds.pipeline);
    let (m, n) = (panel.rows(), panel.cols());
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for &level in &cfg.levels {
        let proportion = observed_fraction(&panel, Treatment(level));
        for kind in cfg.estimators.kinds() {
            let records: Vec<EstimateRecord> = (0..m * n)
                .into_par_iter()
                .map(|k| estimate_entry(&panel, &EntryQuery::new(k / n, k % n, level), kind, Some(&weights), &pipeline))
                .collect::<Result<_>>()?;
            let mut errors = Vec::new();
            let (mut with_ci, mut covered) = (0usize, 0usize);
            for rec in &records {
                let q = rec.query;
                let truth = model.expected(q.row, q.col, q.level);
                if let Some(est) = rec.estimate {
                    errors.push(((est - truth) / truth).abs());
                    if let Some(ci) = rec.ci {
                        with_ci += 1;
                        covered += usize::from(ci.lower <= truth && truth <= ci.upper);
                    }
                }
                if cfg.dump.keeps(rec) {
                    rows.push(EstimateRow::from_record(rec, &panel, Some(rep), Some(truth)));
                }
            }
            let feasible = errors.len();
            metrics.push(ReplicateMetrics {
                replicate: rep,
                estimator: kind,
                level,
                proportion,
                feasible,
                entries: m * n,
                fr: 100.0 * feasible as f64 / (m * n) as f64,
                mre: if feasible > 0 {
                    compensated_sum(errors) / feasible as f64
                } else {
                    f64::NAN
                },
                ci_coverage: if with_ci > 0 {
                    covered as f64 / with_ci as f64
                } else {
                    f64::NAN
                },
            });
        }
    }
    Ok((metrics, rows))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    let std = if xs.len() > 1 {
        (compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Mean ± std per (estimator, level), in first-appearance order.
pub fn aggregate(reps: &[ReplicateMetrics]) -> Vec<MetricsRow> {
    let mut keys: Vec<(EstimatorKind, u16)> = Vec::new();
    for r in reps {
        if !keys.contains(&(r.estimator, r.level)) {
            keys.push((r.estimator, r.level));
        }
    }
    keys.into_iter()
        .map(|(estimator, level)| {
            let group: Vec<&ReplicateMetrics> = reps.iter().filter(|r| r.estimator == estimator && r.level == level).collect();
            let fr: Vec<f64> = group.iter().map(|r| r.fr).collect();
            let mre: Vec<f64> = group.iter().map(|r| r.mre).filter(|x| !x.is_nan()).collect();
            let prop: Vec<f64> = group.iter().map(|r| r.proportion).collect();
            let (fr_mean, fr_std) = mean_std(&fr);
            let (mre_mean, mre_std) = mean_std(&mre);
            MetricsRow {
                estimator,
                level,
                proportion: mean_std(&prop).0,
                fr_mean,
                fr_std,
                mre_mean,
                mre_std,
                replicates: group.len(),
                mre_replicates: mre.len(),
            }
        })
        .collect()
}

/// Which entries a real-panel run estimates.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    List(Vec<EntryQuery>),
    /// Every unobserved entry at each listed level.
    AllMissing { levels: Vec<u16> },
    /// Every entry at each listed level, observed ones included for validation.
    All { levels: Vec<u16> },
}

/// Settings of a real-panel run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealPanelConfig {
    pub estimators: EstimatorSelection,
    pub weights: WeightSource,
    pub pipeline: PipelineConfig,
}

impl Default for RealPanelConfig {
    fn default() -> Self {
        RealPanelConfig {
            estimators: EstimatorSelection::Both,
            weights: WeightSource::EstimatedMaxAbs,
            pipeline: PipelineConfig::default(),
        }
    }
}

/// Estimates the requested entries of an ingested panel.
pub fn run_real_panel(panel: &ObservedPanel, targets: &Targets, cfg: &RealPanelConfig) -> Result<Vec<EstimateRow>> {
    cfg.pipeline.validate()?;
    let weights = match cfg.weights {
        WeightSource::Oracle => {
            return Err(Error::Config("oracle weights need a generating model; use estimated or unit".into()))
        }
        WeightSource::EstimatedMaxAbs => estimate_weights(panel),
        WeightSource::Unit => WeightFunction::unit(panel.levels()),
    };
    let (m, n) = (panel.rows(), panel.cols());
    let check_levels = |levels: &[u16]| -> Result<()> {
        match levels.iter().find(|&&d| d == 0 || d > panel.levels()) {
            Some(d) => Err(Error::Config(format!("target level {d} outside 1..={}", panel.levels()))),
            None => Ok(()),
        }
    };
    let queries: Vec<EntryQuery> = match targets {
        Targets::List(list) => {
            for q in list {
                panel.check_query(q)?;
            }
            list.clone()
        }
        Targets::AllMissing { levels } => {
            check_levels(levels)?;
            levels
                .iter()
                .flat_map(|&d| {
                    (0..m * n)
                        .filter(|&k| !panel.treatment(k / n, k % n).is_observed())
                        .map(move |k| EntryQuery::new(k / n, k % n, d))
                })
                .collect()
        }
        Targets::All { levels } => {
            check_levels(levels)?;
            levels
                .iter()
                .flat_map(|&d| (0..m * n).map(move |k| EntryQuery::new(k / n, k % n, d)))
                .collect()
        }
    };
    let mut level_seen = vec![false; panel.levels() as usize + 1];
    for &t in panel.treatments() {
        level_seen[t.index()] = true;
    }
    let mut out = Vec::with_capacity(queries.len() * 2);
    for kind in cfg.estimators.kinds() {
        let rows: Vec<EstimateRow> = queries
            .par_iter()
            .map(|q| {
                let rec = if level_seen[q.level.index()] {
                    estimate_entry(panel, q, kind, Some(&weights), &cfg.pipeline)?
                } else {
                    EstimateRecord::infeasible(*q, kind, format!("level {} has no observed entries", q.level))
                };
                Ok(EstimateRow::from_record(&rec, panel, None, None))
            })
            .collect::<Result<_>>()?;
        out.extend(rows);
    }
    Ok(out)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

pub const METRICS_HEADER: &[&str] = &[
    "estimator",
    "level",
    "proportion",
    "fr_mean",
    "fr_std",
    "mre_mean",
    "mre_std",
    "replicates",
    "mre_replicates",
];

pub const REPLICATES_HEADER: &[&str] = &[
    "replicate",
    "estimator",
    "level",
    "proportion",
    "feasible",
    "entries",
    "fr",
    "mre",
    "ci_coverage",
];

pub const ESTIMATES_HEADER: &[&str] = &[
    "replicate",
    "estimator",
    "row",
    "col",
    "row_id",
    "col_id",
    "level",
    "feasible",
    "estimate",
    "truth",
    "relative_error",
    "observed",
    "validation_residual",
    "k_used",
    "anchor_rows",
    "anchor_cols",
    "rank",
    "residual_x",
    "residual_q",
    "condition",
    "ci_lower",
    "ci_upper",
    "reason",
];

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    write_csv(path.as_ref(), rows, METRICS_HEADER)
}

/// Provenance record written next to every report.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: toml::Value,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: toml::Value::try_from(config).map_err(|e| Error::Config(e.to_string()))?,
        })
    }
}

/// Writes `metrics.csv`, `replicates.csv`, `estimates.csv` and `manifest.toml`
/// into `dir`, returning the written paths.
pub fn emit_report(
    dir: impl AsRef<Path>,
    metrics: &[MetricsRow],
    replicates: &[ReplicateMetrics],
    dump: &[EstimateRow],
    manifest: &Manifest,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ["metrics.csv", "replicates.csv", "estimates.csv", "manifest.toml"].map(|f| dir.join(f));
    write_metrics_csv(&paths[0], metrics)?;
    write_csv(&paths[1], replicates, REPLICATES_HEADER)?;
    write_csv(&paths[2], dump, ESTIMATES_HEADER)?;
    let text = toml::to_string(manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&paths[3], text).map_err(|e| Error::io(&paths[3], e))?;
    Ok(paths.to_vec())
}

/// Reads a `replicates.csv` written by [`emit_report`].
pub fn read_replicates(path: impl AsRef<Path>) -> Result<Vec<ReplicateMetrics>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.into(),
        line: 0,
        msg: e.to_string(),
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e: csv::Error| Error::Parse {
                path: path.into(),
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Estimator rows by level columns, each cell `FR ± std | MRE ± std`.
pub fn format_table(rows: &[MetricsRow]) -> String {
    let mut levels: Vec<u16> = rows.iter().map(|r| r.level).collect();
    levels.sort_unstable();
    levels.dedup();
    let mut kinds: Vec<EstimatorKind> = Vec::new();
    for r in rows {
        if !kinds.contains(&r.estimator) {
            kinds.push(r.estimator);
        }
    }
    let mut out = String::from("| Algorithm |");
    for d in &levels {
        let prop = rows.iter().find(|r| r.level == *d).map_or(f64::NAN, |r| r.proportion);
        let _ = write!(out, " level {d} ({:.2}%) FR % | MRE |", 100.0 * prop);
    }
    out.push_str("\n|---|");
    for _ in &levels {
        out.push_str("---|---|");
    }
    for k in kinds {
        let _ = write!(out, "\n| {k} |");
        for d in &levels {
            match rows.iter().find(|r| r.estimator == k && r.level == *d) {
                Some(r) => {
                    let _ = write!(out, " {:.2} ± {:.2} | {:.3e} ± {:.1e} |", r.fr_mean, r.fr_std, r.mre_mean, r.mre_std);
                }
                None => out.push_str(" - | - |"),
            }
        }
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.model, ModelParams::four_level_benchmark());
        assert_eq!(cfg.replicates, 10);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(matches!(ExperimentConfig::from_toml_str("replicates = 0"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
        assert!(ExperimentConfig::preset("mnar-0.05").unwrap().model.abs_outcomes);
    }

    #[test]
    fn neumaier() {
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn aggregation() {
        let rep = |r, fr, mre| ReplicateMetrics {
            replicate: r,
            estimator: EstimatorKind::Msnn,
            level: 1,
            proportion: 0.1,
            feasible: 1,
            entries: 1,
            fr,
            mre,
            ci_coverage: f64::NAN,
        };
        let rows = aggregate(&[rep(0, 10.0, 0.1), rep(1, 20.0, f64::NAN)]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].fr_mean, 15.0);
        assert_eq!(rows[0].mre_mean, 0.1);
        assert_eq!(rows[0].mre_replicates, 1);
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use msnn::harness::{
    aggregate, emit_report, format_table, read_replicates, run_real_panel, run_simulation_study, DumpPolicy,
    EstimatorSelection, ExperimentConfig, Manifest, RealPanelConfig, Targets, write_metrics_csv,
};
use msnn::panel::{load_panel_csv, PanelCsvOptions};
use msnn::theory::{
    count_report_csv_row, efficiency_ratios, expected_k_closed_form, monte_carlo_expectations, sparsity_report,
    TheoryInstance, COUNT_REPORT_HEADER, DEFAULT_COUNT_BUDGET,
};
use msnn::{EntryQuery, Error, EstimatorKind, PipelineConfig, RankRule, Result, WeightSource};

#[derive(Parser)]
#[command(name = "msnn", version, about = "Causal matrix completion with mixed synthetic nearest neighbors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated simulation study and write its report.
    Simulate(SimulateArgs),
    /// Estimate entries of a panel read from CSV.
    Estimate(EstimateArgs),
    /// Closed-form and Monte Carlo anchor counts.
    Theory(TheoryArgs),
    /// Re-aggregate a report directory and print the table.
    Report(ReportArgs),
}

#[derive(Args)]
struct PipelineFlags {
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated target levels.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u16>>,
    #[arg(long)]
    x_tol: Option<f64>,
    #[arg(long)]
    q_tol: Option<f64>,
    /// `fixed:L`, `energy:T` or `gap:D`.
    #[arg(long)]
    rank_rule: Option<String>,
    /// `oracle`, `estimated` or `unit`.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    exact_biclique: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ci_level: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML experiment config; omitted keys take benchmark defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `mcar`, `mnar-0.05`, `mnar-0.02` or `zero-noise` (ignored with --config).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    /// `none`, `feasible` or `all`.
    #[arg(long)]
    dump: Option<String>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Panel CSV with header `row_id,col_id,treatment,outcome`.
    #[arg(long)]
    panel: PathBuf,
    /// Declared number of treatment levels.
    #[arg(long)]
    num_levels: Option<u16>,
    /// A target `ROW_ID,COL_ID,LEVEL`; repeatable. Defaults to every missing entry.
    #[arg(long = "target", value_name = "ROW,COL,LEVEL")]
    targets: Vec<String>,
    /// Estimate every entry, observed ones included, for validation.
    #[arg(long)]
    all_entries: bool,
    /// `snn`, `msnn` or `both`.
    #[arg(long, default_value = "both")]
    estimator: String,
    /// Treat missing outcomes as zeros.
    #[arg(long)]
    zero_fill: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    c: usize,
    /// Comma-separated probabilities of levels 1..=l.
    #[arg(long, value_delimiter = ',', required = true)]
    probs: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    level: u16,
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_COUNT_BUDGET)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding `replicates.csv`.
    #[arg(long, default_value = "out")]
    dir: PathBuf,
    /// Also write the re-aggregated metrics here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_estimators(s: &str) -> Result<EstimatorSelection> {
    match s {
        "snn" => Ok(EstimatorSelection::Snn),
        "msnn" => Ok(EstimatorSelection::Msnn),
        "both" => Ok(EstimatorSelection::Both),
        _ => Err(Error::Config(format!("unknown estimator {s:?}"))),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => ExperimentConfig::default(),
    };
    let p = &args.pipeline;
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = &args.dump {
        cfg.dump = match v.as_str() {
            "none" => DumpPolicy::None,
            "feasible" => DumpPolicy::Feasible,
            "all" => DumpPolicy::All,
            _ => return Err(Error::Config(format!("unknown dump policy {v:?}"))),
        };
    }
    if let Some(v) = p.seed {
        cfg.seed = v;
    }
    if let Some(v) = p.k {
        cfg.k = v;
    }
    if let Some(v) = &p.levels {
        cfg.levels = v.clone();
    }
    if let Some(v) = p.x_tol {
        cfg.policy.x_tol = v;
    }
    if let Some(v) = p.q_tol {
        cfg.policy.q_tol = v;
    }
    if let Some(v) = &p.rank_rule {
        cfg.rank_rule = v.parse()?;
    }
    if let Some(v) = &p.weights {
        cfg.weights = v.parse()?;
    }
    if p.exact_biclique {
        cfg.exact_biclique = true;
    }
    if p.ci_level.is_some() {
        cfg.ci_level = p.ci_level;
    }
    cfg.validate()?;
    let out = run_simulation_study(&cfg)?;
    let manifest = Manifest::new("simulate", cfg.seed, &cfg)?;
    emit_report(&args.out, &out.metrics, &out.replicates, &out.dump, &manifest)?;
    print!("{}", format_table(&out.metrics));
    if cfg.estimators == EstimatorSelection::Both {
        println!("replicate-level MSNN < SNN feasible counts: {}", out.dominance_violations);
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let panel = load_panel_csv(&args.panel, PanelCsvOptions { levels: args.num_levels })?.with_zero_fill(args.zero_fill);
    let p = &args.pipeline;
    let mut pipeline = PipelineConfig::default();
    if let Some(v) = p.k {
        pipeline.k = v;
    }
    if let Some(v) = p.seed {
        pipeline.seed = v;
    }
    if let Some(v) = p.x_tol {
        pipeline.policy.x_tol = v;
    }
    if let Some(v) = p.q_tol {
        pipeline.policy.q_tol = v;
    }
    if let Some(v) = &p.rank_rule {
        pipeline.rank_rule = v.parse::<RankRule>()?;
    }
    if p.exact_biclique {
        pipeline.search = msnn::BicliqueMode::exact();
    }
    pipeline.ci_level = p.ci_level;
    let cfg = RealPanelConfig {
        estimators: parse_estimators(&args.estimator)?,
        weights: p.weights.as_deref().map_or(Ok(WeightSource::EstimatedMaxAbs), str::parse)?,
        pipeline,
    };
    let levels = p.levels.clone().unwrap_or_else(|| (1..=panel.levels()).collect());
    let targets = if !args.targets.is_empty() {
        let mut list = Vec::new();
        for t in &args.targets {
            let parts: Vec<&str> = t.split(',').collect();
            let [row, col, level] = parts[..] else {
                return Err(Error::Usage(format!("target {t:?}: expected ROW_ID,COL_ID,LEVEL")));
            };
            let find = |ids: &[String], id: &str| {
                ids.iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::Usage(format!("unknown id {id:?} in target {t:?}")))
            };
            let level: u16 = level.parse().map_err(|_| Error::Usage(format!("bad level in target {t:?}")))?;
            list.push(EntryQuery::new(find(panel.row_ids(), row)?, find(panel.col_ids(), col)?, level));
        }
        Targets::List(list)
    } else if args.all_entries {
        Targets::All { levels }
    } else {
        Targets::AllMissing { levels }
    };
    let rows = run_real_panel(&panel, &targets, &cfg)?;
    let manifest = Manifest::new("estimate", cfg.pipeline.seed, &cfg)?;
    emit_report(&args.out, &[], &[], &rows, &manifest)?;
    for kind in cfg.estimators.kinds() {
        let mine: Vec<_> = rows.iter().filter(|r| r.estimator == kind).collect();
        let feasible = mine.iter().filter(|r| r.feasible).count();
        println!("{kind}: {feasible} of {} targets feasible", mine.len());
    }
    println!("estimates written to {}", args.out.join("estimates.csv").display());
    Ok(())
}

fn theory(args: TheoryArgs) -> Result<()> {
    let inst = TheoryInstance::new(args.m, args.n, args.r, args.c, args.probs.clone(), args.level)?;
    for kind in [EstimatorKind::Snn, EstimatorKind::Msnn] {
        let cf = expected_k_closed_form(&inst, kind);
        println!("E[K'] {kind} closed form: {:e}{}", cf.value, if cf.overflow { " (overflow)" } else { "" });
    }
    let ratios = efficiency_ratios(&inst);
    println!("MSNN/SNN: {:e}", ratios.msnn_over_snn.value);
    println!("SNN(d)/MSNN(d_max): {:e}", ratios.snn_d_over_msnn_dmax.value);
    println!("MSNN(d)/MSNN(d_max): {:e}", ratios.msnn_d_over_msnn_dmax.value);
    for s in sparsity_report(&inst) {
        println!(
            "alpha {:.1}: row term {:.3e}, column term {:.3e}{}",
            s.alpha,
            s.row_term,
            s.col_term,
            if s.small() { "" } else { " (not small)" }
        );
    }
    let study = monte_carlo_expectations(&inst, args.replicates, args.seed, args.budget)?;
    let mut csv = format!("{COUNT_REPORT_HEADER}\n");
    for rep in [&study.snn, &study.msnn] {
        csv.push_str(&count_report_csv_row(&inst, rep));
        csv.push('\n');
        println!(
            "{}: mean K' {:.4} ± {:.4} (closed form {:.4}), P(K >= 1) {:.4}",
            rep.estimator, rep.k_prime.mean, rep.k_prime.se, rep.closed_form.value, rep.k_geq_1.mean
        );
    }
    println!("Monte Carlo MSNN/SNN ratio: {:.6} ± {:.6}", study.ratio, study.ratio_se);
    print!("{csv}");
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("theory.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        let manifest = Manifest::new("theory", args.seed, &inst)?;
        let path = dir.join("manifest.toml");
        std::fs::write(&path, toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?)
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let reps = read_replicates(args.dir.join("replicates.csv"))?;
    let metrics = aggregate(&reps);
    print!("{}", format_table(&metrics));
    if let Some(path) = args.out {
        write_metrics_csv(&path, &metrics)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Theory(a) => theory(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use hazard_search::harness::{
    emit_plots, ground_truth_for, rescore, run_ablation_with, run_baseline_with, run_item_with,
    RunConfig, RunReport,
};
use hazard_search::objectives::{grid_oracle, DEFAULT_GRID_CAP};
use hazard_search::Error;

#[derive(Parser)]
#[command(
    name = "hazard-search",
    version,
    about = "Search black-box parameter spaces for hazardous domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tree search with domain identification and scoring.
    Run(RunArgs),
    /// Uniform random sampling with the same identification and scoring.
    Baseline(RunArgs),
    /// Improved versus original selection on identical seeds.
    Ablate(RunArgs),
    /// Re-score a saved report and check it against thresholds.
    Score(ScoreArgs),
    /// Evaluate the objective on its ground-truth grid.
    Oracle(OracleArgs),
    /// Print the resolved configuration as TOML.
    Config(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: ConfigArgs,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config and HAZARD_SEARCH_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// A report.json written by run or baseline.
    report: PathBuf,
    #[arg(long)]
    min_api: Option<f64>,
    #[arg(long)]
    min_adi: Option<f64>,
    #[arg(long)]
    min_f2: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: ConfigArgs,
    /// Grid points per axis; defaults to the configured evaluation grid.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Objective(String),
    Acceptance(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Objective(_) => Failure::Objective(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn load(args: &ConfigArgs) -> Result<RunConfig, Failure> {
    Ok(match (&args.preset, &args.config) {
        (Some(p), _) => RunConfig::preset(p)?,
        (None, Some(path)) => RunConfig::from_file(path)?,
        (None, None) => {
            return Err(Failure::Config(
                "pass --preset <name> or --config <file>".into(),
            ))
        }
    })
}

fn prepare(args: &RunArgs) -> Result<(RunConfig, Vec<u64>, PathBuf), Failure> {
    let cfg = load(&args.source)?;
    let seeds = args
        .seed
        .map(|s| vec![s])
        .unwrap_or_else(|| cfg.seeds.clone());
    let out = args.out.clone().unwrap_or_else(|| cfg.resolved_out_dir());
    Ok((cfg, seeds, out))
}

fn summarize(report: &RunReport) -> String {
    let m = report.metrics.as_ref();
    let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    format!(
        "seed {:>4}  n={:<6} domains={:<3} f2_grid={} api={} adi={} status={:?}",
        report.seed,
        report.n_samples(),
        report.domains.len(),
        f(m.and_then(|m| m.f2_grid)),
        f(m.map(|m| m.api)),
        f(m.map(|m| m.adi)),
        report.status
    )
}

fn finish(report: &RunReport, dir: &Path) -> Result<(), Failure> {
    emit_plots(report, dir)?;
    println!("{}", summarize(report));
    if let hazard_search::harness::RunStatus::Incomplete { reason } = &report.status {
        return Err(Failure::Objective(format!(
            "seed {}: {reason}",
            report.seed
        )));
    }
    Ok(())
}

fn cmd_run(args: &RunArgs, baseline: bool) -> Result<(), Failure> {
    let (cfg, seeds, out) = prepare(args)?;
    let objective = cfg.build_objective()?;
    let truth = ground_truth_for(&*objective, &cfg)?;
    let mut failure = None;
    for seed in seeds {
        info!("{} seed {seed}", if baseline { "baseline" } else { "run" });
        let report = if baseline {
            run_baseline_with(&*objective, &cfg, seed, truth.as_ref())?
        } else {
            run_item_with(&*objective, &cfg, seed, truth.as_ref())?
        };
        if let Err(e) = finish(&report, &out.join(format!("seed-{seed}"))) {
            failure = Some(e);
        }
    }
    failure.map_or(Ok(()), Err)
}

fn cmd_ablate(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, seeds, out) = prepare(args)?;
    let objective = cfg.build_objective()?;
    let truth = ground_truth_for(&*objective, &cfg)?;
    println!("seed,improved_focus,original_focus");
    for seed in seeds {
        let pair = run_ablation_with(&*objective, &cfg, seed, truth.as_ref())?;
        let dir = out.join(format!("seed-{seed}"));
        emit_plots(&pair.improved, &dir.join("improved"))?;
        emit_plots(&pair.original, &dir.join("original"))?;
        println!(
            "{seed},{:.4},{:.4}",
            pair.improved_focus(),
            pair.original_focus()
        );
    }
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<(), Failure> {
    let report = RunReport::read_json(&args.report)?;
    let objective = report.config.build_objective()?;
    let truth = ground_truth_for(&*objective, &report.config)?;
    let (domains, metrics) = rescore(&report, &*objective, truth.as_ref())?;
    if domains != report.domains || metrics != report.metrics {
        return Err(Failure::Acceptance(
            "re-scored metrics differ from the stored report".into(),
        ));
    }
    println!("{}", summarize(&report));
    let Some(m) = metrics else {
        return Err(Failure::Acceptance("report has no metrics to check".into()));
    };
    let mut failed = Vec::new();
    let mut check = |name: &str, value: Option<f64>, min: Option<f64>| {
        if let Some(min) = min {
            let ok = value.is_some_and(|v| v >= min);
            println!(
                "{name}: {} (min {min}) {}",
                value.map_or("-".into(), |v| format!("{v:.4}")),
                if ok { "pass" } else { "FAIL" }
            );
            if !ok {
                failed.push(name.to_string());
            }
        }
    };
    check("api", Some(m.api), args.min_api);
    check("adi", Some(m.adi), args.min_adi);
    check("f2_grid", m.f2_grid, args.min_f2);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!(
            "below threshold: {}",
            failed.join(", ")
        )))
    }
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let cfg = load(&args.source)?;
    let objective = cfg.build_objective()?;
    let resolution = args
        .resolution
        .or(cfg.evaluation.grid_resolution)
        .ok_or_else(|| {
            Failure::Config("no grid resolution configured; pass --resolution".into())
        })?;
    let truth = grid_oracle(
        &*objective,
        &vec![resolution; objective.space().dim()],
        DEFAULT_GRID_CAP,
    )?;
    let out = args.out.clone().unwrap_or_else(|| cfg.resolved_out_dir());
    truth.persist(&out, "ground_truth")?;
    println!(
        "{}: {} points, hazardous fraction {:.6e}, {} reference domains -> {}",
        truth.objective,
        truth.len(),
        truth.hazardous_fraction,
        truth.true_boxes.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, false),
        Command::Baseline(a) => cmd_run(a, true),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Score(a) => cmd_score(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Config(a) => load(a).and_then(|c| {
            print!("{}", c.to_toml_string()?);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Objective(m)) => {
            eprintln!("objective failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("acceptance failure: {m}");
            ExitCode::from(3)
        }
    }
}

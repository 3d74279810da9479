//! `ads`: run simulations, reproduce the benchmark tables, and fit or apply
//! models on long-format panel CSV files.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use ads_panel::io::{predict_long_csv, render_report, write_predictions, ModelBundle};
use ads_panel::sim::run_suite_with;
use ads_panel::{
    chronological_split, evaluate, fit_estimator, paper_table, read_long_csv, run_cell,
    write_report, AdsConfig, AdsError, Design, DgpConfig, DgpKind, EstimatorKind, GammaRule,
    LassoConfig, LongSchema, MseReport, NoiseEstimate, PaperTable, PenaltyRule, ReportFormat,
};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ads", version, about = "Adaptive discrete smoothing for panel data")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run of a single simulation cell.
    Simulate(SimulateArgs),
    /// Reproduce one of the benchmark tables.
    Table(TableArgs),
    /// Fit a model on a long-format CSV and report train/test MSE.
    Fit(FitArgs),
    /// Apply a saved model bundle to a long-format CSV.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct SmoothingArgs {
    /// Off-diagonal weight scale in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Kernel bandwidth: a non-negative number or `median`.
    #[arg(long, default_value = "median")]
    gamma: String,
    /// Extra weight-update rounds after the base pass.
    #[arg(long, default_value_t = 0)]
    refine: usize,
    /// Fixed Lasso penalty instead of the plug-in rule.
    #[arg(long)]
    lambda: Option<f64>,
    /// Noise re-estimate inside the plug-in rule: `post-lasso` or `lasso`.
    #[arg(long, default_value = "post-lasso")]
    noise: String,
    /// Pilot fits used to refine the plug-in noise estimate.
    #[arg(long, default_value_t = 15)]
    sigma_updates: usize,
    /// Include the intercept in the L1 penalty.
    #[arg(long)]
    penalize_intercept: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    dgp: u8,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    cor: Option<f64>,
    #[arg(long, default_value = "iid")]
    design: String,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    /// Comma-separated subset of naive,ols,lasso,ads-ols,ads-lasso.
    #[arg(long)]
    estimators: String,
    #[command(flatten)]
    smoothing: SmoothingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[arg(long)]
    name: String,
    #[arg(long, default_value_t = ads_panel::sim::DEFAULT_REPS)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    y: String,
    #[arg(long)]
    id: String,
    #[arg(long)]
    time: String,
    #[arg(long)]
    estimator: String,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    smoothing: SmoothingArgs,
    /// Fit the Lasso on raw covariate scales.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<AdsError> for Failure {
    fn from(e: AdsError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn smoothing_config(args: &SmoothingArgs, lasso: LassoConfig) -> Result<AdsConfig, Failure> {
    let gamma = match args.gamma.as_str() {
        "median" => GammaRule::MedianHeuristic,
        raw => GammaRule::Fixed(usage(raw.parse::<f64>())?),
    };
    let penalty = match args.lambda {
        Some(l) => PenaltyRule::Fixed(l),
        None => PenaltyRule::Plugin,
    };
    let noise_estimate = match args.noise.as_str() {
        "post-lasso" => NoiseEstimate::PostLasso,
        "lasso" => NoiseEstimate::LassoResidual,
        other => return Err(Failure::Usage(format!("unknown --noise {other:?}"))),
    };
    let cfg = AdsConfig {
        delta: args.delta,
        gamma,
        refine_iterations: args.refine,
        lasso: LassoConfig {
            penalty,
            noise_estimate,
            sigma_updates: args.sigma_updates,
            penalize_intercept: args.penalize_intercept,
            ..lasso
        },
        ..AdsConfig::default()
    };
    usage(cfg.validate())?;
    Ok(cfg)
}

fn parse_estimators(raw: &str) -> Result<Vec<EstimatorKind>, Failure> {
    let list = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<EstimatorKind>, _>>();
    let list = usage(list)?;
    if list.is_empty() {
        return Err(Failure::Usage("--estimators is empty".into()));
    }
    Ok(list)
}

fn emit(report: &MseReport, out: Option<&PathBuf>, format: ReportFormat) -> Result<(), Failure> {
    match out {
        Some(path) => write_report(report, path, format)?,
        None => print!("{}", render_report(report, format)),
    }
    for f in &report.failures {
        eprintln!(
            "cell failed ({}): {}/{} repetitions failed, first error: {}",
            f.cell, f.failed_reps, f.total_reps, f.first_error
        );
    }
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime("one or more cells failed".into()))
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let dgp = usage(DgpKind::from_number(args.dgp))?;
    let cell = DgpConfig {
        s: args.s,
        cor: args.cor,
        design: usage(args.design.parse::<Design>())?,
        noise_sd: args.noise_sd,
        ..DgpConfig::new(dgp, args.n, args.t, args.p)
    };
    usage(cell.validate())?;
    if args.reps == 0 {
        return Err(Failure::Usage("--reps must be >= 1".into()));
    }
    let format = usage(args.format.parse::<ReportFormat>())?;
    let estimators = parse_estimators(&args.estimators)?;
    let ads = smoothing_config(&args.smoothing, LassoConfig::default())?;
    let report = run_cell(&cell, &estimators, &ads, args.reps, args.seed)?;
    emit(&report, args.out.as_ref(), format)
}

fn cmd_table(args: TableArgs) -> Result<(), Failure> {
    let table = usage(args.name.parse::<PaperTable>())?;
    let format = usage(args.format.parse::<ReportFormat>())?;
    if args.reps == 0 {
        return Err(Failure::Usage("--reps must be >= 1".into()));
    }
    let mut cfg = paper_table(table);
    cfg.reps = args.reps;
    cfg.master_seed = args.seed;
    let total = cfg.cells.len();
    let mut done = 0;
    let report = run_suite_with(&cfg, |cell, part| {
        done += 1;
        let summary: Vec<String> = part
            .rows
            .iter()
            .map(|r| format!("{}={:.4}", r.estimator, r.mse))
            .collect();
        eprintln!(
            "[{done}/{total}] dgp={} design={} n={} t={} cor={} {}",
            cell.dgp.number(),
            cell.design,
            cell.n,
            cell.t,
            cell.cor.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
            summary.join(" ")
        );
    })?;
    emit(&report, Some(&args.out), format)
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    let kind = usage(args.estimator.parse::<EstimatorKind>())?;
    let lasso = LassoConfig {
        standardize: !args.no_standardize,
        ..LassoConfig::for_real_data()
    };
    let cfg = smoothing_config(&args.smoothing, lasso)?;
    let schema = LongSchema::new(args.y, args.id, args.time);
    let data = read_long_csv(&args.data, &schema)?;
    let (train, test) = chronological_split(&data, args.test_fraction)?;
    let (coefs, weights) = fit_estimator(&train, kind, &cfg)?;
    let train_mse = evaluate(&train, &coefs)?;
    let test_mse = evaluate(&test, &coefs)?;
    println!("estimator,n,t_train,t_test,p,train_mse,test_mse");
    println!(
        "{kind},{},{},{},{},{train_mse:.6},{test_mse:.6}",
        data.n_individuals(),
        train.n_periods(),
        test.n_periods(),
        data.n_covariates()
    );
    if let Some(dir) = args.model_out {
        let bundle = ModelBundle {
            estimator: kind,
            schema,
            ids: train.ids().to_vec(),
            covariate_names: train.covariate_names().to_vec(),
            coefs,
            weights,
            extra: vec![
                ("test_fraction".into(), args.test_fraction.to_string()),
                ("gamma".into(), args.smoothing.gamma.clone()),
                ("refine".into(), args.smoothing.refine.to_string()),
            ],
        };
        bundle.save(&dir)?;
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Failure> {
    let bundle = ModelBundle::load(&args.model)?;
    let rows = predict_long_csv(&bundle, &args.data)?;
    write_predictions(&rows, &bundle.schema, &args.out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Table(a) => cmd_table(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

//! Batch front end: run ruin estimations, asymptotic constants, strategy
//! comparisons, condition checks, and eps-ladder convergence studies from a
//! TOML experiment file, emitting CSV or JSON tables.
//!
//! Exit codes: 0 success, 1 runtime error or failed required condition,
//! 2 configuration error. `RUINLAB_THREADS` caps the worker count; results
//! are invariant to it.

// NaN must fail validation, hence `if !(x > 0.0)` rather than `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ruinlab_core::asymptotics::{
    asymptotic_ruin_approx, closed_form_constant, estimate_constant_mc, family_infimum,
    reduction_ratio, AsymptoticConstant,
};
use ruinlab_core::engine::{
    convergence_study, estimate_ruin_probability, estimate_ruin_probability_is, RuinEstimate,
};
use ruinlab_core::market::{AssetModel, RateModel};
use ruinlab_core::strategy::{
    asymptotically_optimal_pi, check_exponential_moment_conditions, check_levy_moment_condition,
    ConditionReport, Strategy, Verdict,
};

use config::{load_experiment, Experiment, OutputFormat, Overrides};
use output::{Cell, Table};

#[derive(Parser)]
#[command(
    name = "ruinlab",
    about = "Finite-horizon ruin probabilities for invested insurance reserves",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ruin-probability estimates, one row per eps.
    Simulate(RunArgs),
    /// The asymptotic constant K and the small-noise ruin approximation.
    Asymptotic(RunArgs),
    /// Asymptotically optimal fraction, its constant, and a family table.
    Optimal(RunArgs),
    /// Checkable sufficient conditions; non-zero exit when one fails.
    Check(RunArgs),
    /// Eps-ladder convergence of the normalized ratio toward its limit.
    Converge(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.n_paths.
    #[arg(long)]
    paths: Option<u64>,
    /// Override run.eps (comma-separated list).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Override run.mesh.
    #[arg(long)]
    mesh: Option<f64>,
    /// Override run.out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override run.format.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ruinlab_core::Error> for CliError {
    fn from(e: ruinlab_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let args = match &cli.command {
        Command::Simulate(a)
        | Command::Asymptotic(a)
        | Command::Optimal(a)
        | Command::Check(a)
        | Command::Converge(a) => a,
    };
    let overrides = Overrides {
        seed: args.seed,
        paths: args.paths,
        eps: args.eps.clone(),
        mesh: args.mesh,
        out: args.out.clone(),
        format: args.format,
    };
    let experiment = load_experiment(&args.config, &overrides)?;
    let pool = build_pool()?;
    pool.install(|| match cli.command {
        Command::Simulate(_) => cmd_simulate(&experiment),
        Command::Asymptotic(_) => cmd_asymptotic(&experiment),
        Command::Optimal(_) => cmd_optimal(&experiment),
        Command::Check(_) => cmd_check(&experiment),
        Command::Converge(_) => cmd_converge(&experiment),
    })
}

fn build_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("RUINLAB_THREADS") {
        let threads: usize = value.parse().map_err(|_| {
            CliError::Config(format!("RUINLAB_THREADS = {value:?} is not a thread count"))
        })?;
        if threads == 0 {
            return Err(CliError::Config(
                "RUINLAB_THREADS must be at least 1".into(),
            ));
        }
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot build thread pool: {e}")))
}

fn estimate_row(est: &RuinEstimate) -> Vec<Cell> {
    vec![
        Cell::Float(est.eps),
        Cell::Float(est.x),
        Cell::Int(est.n_paths),
        Cell::Float(est.p_hat),
        Cell::Float(est.ci_halfwidth),
        Cell::Float(est.normalized_ratio),
        Cell::Int(est.seed),
    ]
}

fn run_estimator(exp: &Experiment, eps: f64) -> Result<RuinEstimate, CliError> {
    let est = if exp.theta > 0.0 {
        estimate_ruin_probability_is(
            &exp.claims,
            &exp.market,
            &exp.strategy,
            exp.x,
            eps,
            exp.n_paths,
            exp.mesh,
            exp.seed,
            exp.theta,
        )?
    } else {
        estimate_ruin_probability(
            &exp.claims,
            &exp.market,
            &exp.strategy,
            exp.x,
            eps,
            exp.n_paths,
            exp.mesh,
            exp.seed,
        )?
    };
    Ok(est)
}

fn cmd_simulate(exp: &Experiment) -> Result<u8, CliError> {
    let mut table = Table::new(vec![
        "eps",
        "x",
        "n_paths",
        "p_hat",
        "ci",
        "normalized_ratio",
        "seed",
    ]);
    for &eps in &exp.eps_ladder {
        let est = run_estimator(exp, eps)?;
        table.push(estimate_row(&est));
    }
    table.emit(exp.format, exp.out.as_deref())?;
    Ok(0)
}

fn claim_tail_index(exp: &Experiment) -> Result<f64, CliError> {
    exp.claims.claim_law.tail_index().ok_or_else(|| {
        CliError::Config("this command needs a regularly varying (pareto) claim law".into())
    })
}

fn constant_for(exp: &Experiment, alpha: f64) -> Result<AsymptoticConstant, CliError> {
    match closed_form_constant(&exp.market, &exp.strategy, alpha)? {
        Some(k) => Ok(k),
        None => Ok(estimate_constant_mc(
            &exp.market,
            &exp.strategy,
            alpha,
            exp.n_paths,
            exp.mesh,
            exp.seed,
        )?),
    }
}

fn cmd_asymptotic(exp: &Experiment) -> Result<u8, CliError> {
    let alpha = claim_tail_index(exp)?;
    let constant = constant_for(exp, alpha)?;
    let tail = exp.claims.levy_tail();

    let mut table = Table::new(vec!["quantity", "eps", "value", "method", "std_error"]);
    table.push(vec![
        Cell::Text("constant".into()),
        Cell::Empty,
        Cell::Float(constant.value),
        Cell::Text(constant.method.label().into()),
        constant.std_error.map(Cell::Float).unwrap_or(Cell::Empty),
    ]);
    for &eps in &exp.eps_ladder {
        if !(eps > 0.0) {
            return Err(CliError::Config(
                "asymptotic approximations need eps > 0".into(),
            ));
        }
        let approx = asymptotic_ruin_approx(exp.x, eps, alpha, &tail, &constant)?;
        table.push(vec![
            Cell::Text("ruin_approx".into()),
            Cell::Float(eps),
            Cell::Float(approx),
            Cell::Text(constant.method.label().into()),
            Cell::Empty,
        ]);
    }
    table.emit(exp.format, exp.out.as_deref())?;
    Ok(0)
}

fn cmd_optimal(exp: &Experiment) -> Result<u8, CliError> {
    let alpha = claim_tail_index(exp)?;
    let (mu, sigma) = match exp.market.assets.as_slice() {
        [AssetModel::Gbm { mu, sigma }] => (*mu, *sigma),
        _ => {
            return Err(CliError::Config(
                "the optimal command needs exactly one gbm asset".into(),
            ))
        }
    };
    let RateModel::Constant(r) = exp.market.rate else {
        return Err(CliError::Config(
            "the optimal command needs a constant rate".into(),
        ));
    };

    let pi_star = asymptotically_optimal_pi(mu, r, sigma, alpha)?;
    let k_of = |pi: f64| -> Result<f64, CliError> {
        let strategy = Strategy::Constant { weights: vec![pi] };
        let k = closed_form_constant(&exp.market, &strategy, alpha)?
            .expect("gbm markets always have a closed form");
        Ok(k.value)
    };
    let k_star = k_of(pi_star)?;
    let k_zero = k_of(0.0)?;
    let sharpe = (mu - r) / sigma;
    let ratio = reduction_ratio(alpha, r, sharpe)?;

    let mut table = Table::new(vec!["quantity", "pi", "value"]);
    table.push(vec![
        Cell::Text("pi_star".into()),
        Cell::Empty,
        Cell::Float(pi_star),
    ]);
    table.push(vec![
        Cell::Text("constant".into()),
        Cell::Float(pi_star),
        Cell::Float(k_star),
    ]);
    table.push(vec![
        Cell::Text("constant".into()),
        Cell::Float(0.0),
        Cell::Float(k_zero),
    ]);
    table.push(vec![
        Cell::Text("reduction_ratio".into()),
        Cell::Empty,
        Cell::Float(ratio),
    ]);

    if !exp.candidates.is_empty() {
        let mut family = Vec::with_capacity(exp.candidates.len());
        for &pi in &exp.candidates {
            let k = k_of(pi)?;
            family.push((pi, k));
            table.push(vec![
                Cell::Text("candidate".into()),
                Cell::Float(pi),
                Cell::Float(k),
            ]);
        }
        let (argmin, k_min) = family_infimum(&family)?;
        table.push(vec![
            Cell::Text("family_argmin".into()),
            Cell::Float(family[argmin].0),
            Cell::Float(k_min),
        ]);
    }
    table.emit(exp.format, exp.out.as_deref())?;
    Ok(0)
}

fn cmd_check(exp: &Experiment) -> Result<u8, CliError> {
    let alpha = claim_tail_index(exp)?;
    let delta = exp.check_delta.unwrap_or(0.1 * alpha);
    let n_assets = exp.market.n_assets().max(1);

    let mut reports: Vec<(usize, ConditionReport)> = Vec::new();
    for (k, asset) in exp.market.assets.iter().enumerate() {
        match asset {
            AssetModel::ExpLevy {
                jump_rate, jump, ..
            } => {
                let report = check_levy_moment_condition(jump, *jump_rate, alpha, delta, n_assets)?;
                reports.push((k, report));
            }
            AssetModel::Gbm { .. } | AssetModel::DiffusionSv { .. } => {
                let conditions = check_exponential_moment_conditions(
                    &exp.strategy,
                    asset,
                    &exp.market.rate,
                    alpha,
                    exp.check_gamma,
                )?;
                reports.extend(conditions.into_iter().map(|c| (k, c)));
            }
        }
    }

    let mut table = Table::new(vec![
        "condition",
        "asset",
        "verdict",
        "diagnostic",
        "detail",
    ]);
    let mut any_failed = false;
    for (asset_index, report) in &reports {
        any_failed |= report.verdict == Verdict::Fails;
        let verdict = match report.verdict {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Undecidable => "undecidable-with-method",
        };
        table.push(vec![
            Cell::Text(report.condition.clone()),
            Cell::Int(*asset_index as u64),
            Cell::Text(verdict.into()),
            report.diagnostic.map(Cell::Float).unwrap_or(Cell::Empty),
            Cell::Text(format!(
                "{} (delta = {delta}, a = {})",
                report.detail, exp.check_a
            )),
        ]);
    }
    table.emit(exp.format, exp.out.as_deref())?;
    Ok(if any_failed { 1 } else { 0 })
}

fn cmd_converge(exp: &Experiment) -> Result<u8, CliError> {
    let table_data = convergence_study(
        &exp.claims,
        &exp.market,
        &exp.strategy,
        exp.x,
        &exp.eps_ladder,
        exp.n_paths,
        exp.mesh,
        exp.seed,
        exp.theta,
    )?;

    let mut table = Table::new(vec![
        "eps",
        "x",
        "n_paths",
        "p_hat",
        "ci",
        "normalized_ratio",
        "limit",
        "approx",
        "ratio_to_limit",
        "seed",
    ]);
    for row in &table_data.rows {
        let mut cells = estimate_row(&row.estimate);
        let seed = cells.pop().expect("seed column");
        cells.push(Cell::Float(row.limit));
        cells.push(Cell::Float(row.approx));
        cells.push(Cell::Float(row.ratio_to_limit));
        cells.push(seed);
        table.push(cells);
    }
    table.emit(exp.format, exp.out.as_deref())?;
    Ok(0)
}

//! `cldigdt` command-line driver.
//!
//! Exit codes: 0 success, 1 model infeasibility, 2 usage or any other error.

mod commands;
mod config;
mod report;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use cldigdt::dispatch::DispatchError;
use cldigdt::evaluate::EvalError;
use cldigdt::robust::RobustError;

use config::{PartialConfig, RunConfig};
use rundir::RunDir;

#[derive(Parser)]
#[command(name = "cldigdt", version, about = "Confidence-level robust two-stage dispatch studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load or generate the history and write it with the forecast.
    Ingest(Flags),
    /// Build IDM credible bands for every source and hour.
    BuildBands(Flags),
    /// Deterministic dispatch at the forecast (Λ₀).
    SolveDt(Flags),
    /// Classic IGDT benchmark.
    SolveIgdt(Flags),
    /// Confidence-level IGDT with iterative refinement of α.
    SolveCldigdt(Flags),
    /// Out-of-sample evaluation of the DT, IGDT and CL-DIGDT schedules.
    Evaluate(Flags),
    /// δ* and α* over a list of deviation factors.
    SweepSigma(Flags),
    /// Consolidated tables from the artifacts of a run directory.
    Report(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// TOML file with the same keys as the flags; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Network case JSON (default: bundled IEEE 33-bus case).
    #[arg(long)]
    case: Option<PathBuf>,
    /// History CSV with columns day,hour,source,value_kw.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Generate the history; optional path to a generator spec JSON.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    synthetic: Option<String>,
    /// Days of synthetic history.
    #[arg(long)]
    days: Option<u32>,
    /// Deviation factor σ.
    #[arg(long)]
    sigma: Option<f64>,
    /// Accuracy of α*.
    #[arg(long)]
    epsilon: Option<f64>,
    /// IDM confidence index γ.
    #[arg(long)]
    gamma: Option<f64>,
    /// IDM prior strength λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Segments of the piecewise-linear CDF approximation.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed of the synthetic generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the out-of-sample scenario draw.
    #[arg(long)]
    eval_seed: Option<u64>,
    /// Number of out-of-sample scenarios.
    #[arg(long)]
    scenarios: Option<usize>,
    /// Fraction of trailing days held out for evaluation.
    #[arg(long)]
    holdout: Option<f64>,
    /// Comma-separated σ values for sweep-sigma.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also require feasibility at the best-case corner of the set.
    #[arg(long)]
    enforce_corners: bool,
}

impl Flags {
    fn config(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => PartialConfig::from_file(p)?,
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            case: self.case.clone(),
            history: self.history.clone(),
            synthetic: self.synthetic.clone(),
            days: self.days,
            sigma: self.sigma,
            epsilon: self.epsilon,
            gamma: self.gamma,
            lambda: self.lambda,
            grid: self.grid,
            seed: self.seed,
            eval_seed: self.eval_seed,
            scenarios: self.scenarios,
            holdout: self.holdout,
            sigmas: self.sigmas.clone(),
            out: self.out.clone(),
            enforce_corners: self.enforce_corners.then_some(true),
        };
        RunConfig::resolve(base.overlay(flags))
    }
}

fn run(cli: Cli) -> Result<()> {
    let (name, flags) = match &cli.command {
        Command::Ingest(f) => ("ingest", f),
        Command::BuildBands(f) => ("build-bands", f),
        Command::SolveDt(f) => ("solve-dt", f),
        Command::SolveIgdt(f) => ("solve-igdt", f),
        Command::SolveCldigdt(f) => ("solve-cldigdt", f),
        Command::Evaluate(f) => ("evaluate", f),
        Command::SweepSigma(f) => ("sweep-sigma", f),
        Command::Report(f) => ("report", f),
    };
    if let Command::Report(f) = &cli.command {
        // Reports depend only on artifacts, so no history is needed.
        let out = match &f.config {
            Some(p) => PartialConfig::from_file(p)?.overlay(PartialConfig {
                out: f.out.clone(),
                ..Default::default()
            }),
            None => PartialConfig {
                out: f.out.clone(),
                ..Default::default()
            },
        }
        .out
        .unwrap_or_else(|| PathBuf::from("run"));
        let dir = RunDir::open(&out)?;
        return report::emit_report(&dir);
    }
    let cfg = flags.config()?;
    let dir = RunDir::open(&cfg.out)?;
    match &cli.command {
        Command::Ingest(_) => commands::ingest(&cfg, &dir)?,
        Command::BuildBands(_) => commands::build_bands_cmd(&cfg, &dir)?,
        Command::SolveDt(_) => commands::solve_dt(&cfg, &dir)?,
        Command::SolveIgdt(_) => commands::solve_igdt_cmd(&cfg, &dir)?,
        Command::SolveCldigdt(_) => commands::solve_cldigdt_cmd(&cfg, &dir)?,
        Command::Evaluate(_) => commands::evaluate_cmd(&cfg, &dir)?,
        Command::SweepSigma(_) => commands::sweep_sigma(&cfg, &dir)?,
        Command::Report(_) => unreachable!(),
    }
    dir.record(name, &cfg)
}

fn is_infeasible(err: &anyhow::Error) -> bool {
    fn dispatch(e: &DispatchError) -> bool {
        matches!(e, DispatchError::Infeasible)
    }
    fn robust(e: &RobustError) -> bool {
        match e {
            RobustError::BudgetInfeasible { .. } => true,
            RobustError::Dispatch(d) => dispatch(d),
            _ => false,
        }
    }
    err.chain().any(|e| {
        e.downcast_ref::<DispatchError>().is_some_and(dispatch)
            || e.downcast_ref::<RobustError>().is_some_and(robust)
            || e.downcast_ref::<EvalError>().is_some_and(|e| match e {
                EvalError::Robust(r) => robust(r),
                EvalError::Dispatch(d) => dispatch(d),
                _ => false,
            })
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_infeasible(&e) { 1 } else { 2 })
        }
    }
}

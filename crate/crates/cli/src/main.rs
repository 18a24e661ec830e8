//! `poolsim`: price anticipations, simulate scenarios, sweep spreads and run
//! the reference checks.
//!
//! Exit codes: 0 success, 1 invalid configuration or failed check, 2 usage
//! error.

mod price;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use poolsim_core::bundle::{SimulationBundle, SweepBundle};
use poolsim_core::validation::{find, CHECKS};
use poolsim_core::{Objective, ScenarioConfig};

#[derive(Parser)]
#[command(name = "poolsim", version, about = "Receivables-anticipation lending pool simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quote anticipation prices as CSV rows.
    Price(price::PriceArgs),
    /// Run a scenario and write series, transactions and summary files.
    Simulate(SimulateArgs),
    /// Sweep the platform spread and report the best candidate.
    Optimize(OptimizeArgs),
    /// Run the reference scenarios and report pass/fail per check.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Execute runs on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Mean,
    Terminal,
    Cumulative,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Mean => Objective::Mean,
            ObjectiveArg::Terminal => Objective::Terminal,
            ObjectiveArg::Cumulative => Objective::Cumulative,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Annualized spreads to evaluate, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    spreads: Vec<f64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mean")]
    objective: ObjectiveArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Run only the named check.
    #[arg(long)]
    only: Option<String>,
    /// List check names and exit.
    #[arg(long)]
    list: bool,
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Check(anyhow::Error),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Check(e)
    }
}

impl From<poolsim_core::Error> for Failure {
    fn from(e: poolsim_core::Error) -> Self {
        Failure::Check(e.into())
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = ScenarioConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(config)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let bundle = SimulationBundle::build(&config, args.seed, args.runs, !args.serial)?;
    bundle
        .write_to(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} run(s) of {} periods to {}",
        args.runs,
        config.horizon,
        args.out.display()
    );
    Ok(())
}

fn optimize(args: OptimizeArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let bundle = SweepBundle::build(&config, &args.spreads, args.runs, args.seed, args.objective.into())
        .map_err(|e| Failure::Usage(e.into()))?;
    bundle
        .write_to(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    for c in &bundle.result.candidates {
        println!(
            "spread {:<8} mean {:>12.4} se {:>10.4} relative {:.4}",
            c.spread, c.mean, c.std_error, c.relative_volume
        );
    }
    println!("best spread {}", bundle.best_spread);
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Failure> {
    if args.list {
        for c in &CHECKS {
            println!("{:<22} {}", c.name, c.summary);
        }
        return Ok(());
    }
    let selected: Vec<_> = match &args.only {
        Some(name) => vec![find(name).ok_or_else(|| {
            let names: Vec<_> = CHECKS.iter().map(|c| c.name).collect();
            Failure::Usage(anyhow::anyhow!("unknown check {name:?}; expected one of {}", names.join(", ")))
        })?],
        None => CHECKS.iter().collect(),
    };
    let mut failed = 0;
    for check in selected {
        let report = check.run().with_context(|| format!("check {}", check.name))?;
        failed += usize::from(!report.passed);
        println!("{report}");
    }
    if failed > 0 {
        return Err(Failure::Check(anyhow::anyhow!("{failed} check(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Price(args) => price::run(args),
        Command::Simulate(args) => simulate(args),
        Command::Optimize(args) => optimize(args),
        Command::Validate(args) => validate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
    }
}

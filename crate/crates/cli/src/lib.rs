//! Command-line harness for the `bdnet` toolkit: simulations, closed forms,
//! bounds and the acceptance checks, written as CSV or JSON artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod validate;

use clap::{Args, Parser, Subcommand};

use crate::commands::*;
use crate::config::{CommonArgs, Format, RunConfig};
use crate::error::{CliError, Result, EXIT_CONFIG, EXIT_CRITERION, EXIT_OK};
use crate::validate::Preset;

#[derive(Debug, Parser)]
#[command(name = "bdnet", version, about = "Birth-death dynamic network simulations and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "standard")]
    pub preset: Preset,
    /// Do not print the per-criterion status lines to stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate networks and record the degree of a uniformly picked living node.
    Simulate(SimulateArgs),
    /// Tabulate the population law or the limiting degree law.
    Pmf(PmfArgs),
    /// Closed-form moments with Monte Carlo estimates.
    Moments(MomentsArgs),
    /// Age distribution functions on a grid.
    Ages(AgesArgs),
    /// Contour bijection and tree-law checks.
    ContourCheck(ContourArgs),
    /// Empirical total variation to the limiting degree law against the bounds.
    TvCurve(TvCurveArgs),
    /// Evaluate the convergence bounds.
    Bounds(BoundsArgs),
    /// Monte Carlo and closed-form checks of the supporting lemmas.
    LemmaChecks(LemmaArgs),
    /// Run all acceptance criteria and write a JSON report.
    Validate(ValidateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Pmf(_) => "pmf",
            Command::Moments(_) => "moments",
            Command::Ages(_) => "ages",
            Command::ContourCheck(_) => "contour-check",
            Command::TvCurve(_) => "tv-curve",
            Command::Bounds(_) => "bounds",
            Command::LemmaChecks(_) => "lemma-checks",
            Command::Validate(_) => "validate",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Pmf(a) => &a.common,
            Command::Moments(a) => &a.common,
            Command::Ages(a) => &a.common,
            Command::ContourCheck(a) => &a.common,
            Command::TvCurve(a) => &a.common,
            Command::Bounds(a) => &a.common,
            Command::LemmaChecks(a) => &a.common,
            Command::Validate(a) => &a.common,
        }
    }
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<bool> {
    let name = command.name();
    let outcome = match command {
        Command::Simulate(a) => simulate(cfg, a)?,
        Command::Pmf(a) => pmf(cfg, a)?,
        Command::Moments(_) => moments(cfg)?,
        Command::Ages(a) => ages(cfg, a)?,
        Command::ContourCheck(a) => contour_check(cfg, a)?,
        Command::TvCurve(a) => tv_curve_cmd(cfg, a)?,
        Command::Bounds(_) => bounds(cfg)?,
        Command::LemmaChecks(a) => lemma_checks_cmd(cfg, a)?,
        Command::Validate(a) => {
            let report = validate::run_all(a.preset, cfg.seed, |r| {
                if !a.quiet {
                    eprintln!("{}", r.line());
                }
            })?;
            output::emit(name, cfg, report.to_json().as_bytes())?;
            return Ok(report.passed);
        }
    };
    output::write_table(name, cfg, &outcome.table)?;
    Ok(outcome.passed)
}

/// Resolve the configuration and run one command, returning its exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let mut cfg = RunConfig::resolve(cli.command.common().clone())?;
    if matches!(cli.command, Command::Validate(_)) && cli.command.common().format.is_none() {
        cfg.format = Format::Json;
    }
    let passed = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?
            .install(|| dispatch(&cli.command, &cfg))?,
        None => dispatch(&cli.command, &cfg)?,
    };
    Ok(if passed { EXIT_OK } else { EXIT_CRITERION })
}

/// Exit code for an error: 2 for bad configuration, input or output paths,
/// 1 when a simulation could not meet its conditioning.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
        CliError::Model(bdnet::Error::Domain(_) | bdnet::Error::Invalid(_)) => EXIT_CONFIG,
        _ => EXIT_CRITERION,
    }
}

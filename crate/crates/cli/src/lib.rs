//! Command-line front end for the `seqmt` experiments.
//!
//! Subcommands: `calibrate`, `simulate`, `sweep` and `sprt-asn`. Exit status
//! is 0 on success, 1 for usage or configuration errors, 2 when an
//! experiment truncated more than 5% of its trials, and 3 for I/O failures.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, Format, RunConfig};
use crate::error::{CliError, Result};
use crate::report::{write_rows, Provenance};

pub const EXIT_UNRELIABLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "seqmt",
    version,
    about = "Sequential multiple testing on equicorrelated Gaussian streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the calibrated thresholds of a config without simulating.
    Calibrate(CalibrateArgs),
    /// Run a Monte Carlo experiment and write the summary row.
    Simulate(SimulateArgs),
    /// Run the config's alpha or rho grid and write one row per point.
    Sweep(RunArgs),
    /// Print Wald and asymptotic ASN values of an SPRT.
    SprtAsn(SprtArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replications; overrides the config.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Horizon cap; overrides the config.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Per-trial CSV with stopping time and error counts.
    #[arg(long)]
    pub trial_dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SprtArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub theta1: f64,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn write_destination(path: Option<&Path>, content: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::io(format!("cannot write {}", p.display()), e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("cannot write to standard output", e))
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut rc = parse_config(&args.config)?;
    rc.override_mc(args.seed, args.reps, args.horizon)?;
    Ok(rc)
}

/// Command-line path and format win over the config's `output` section.
fn destination(rc: &RunConfig, args: &OutputArgs) -> (Option<PathBuf>, Format) {
    let path = args.out.clone().or_else(|| rc.output.path.clone());
    let format = args.format.or(rc.output.format).unwrap_or_default();
    (path, format)
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match workers {
        None => f(),
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(f),
    }
}

fn write_report<T: serde::Serialize>(rc: &RunConfig, args: &OutputArgs, rows: &[T]) -> Result<()> {
    let (path, format) = destination(rc, args);
    let mut buf = Vec::new();
    write_rows(&mut buf, format, &Provenance::new(rc)?, rows)?;
    write_destination(path.as_deref(), &buf)
}

fn exit_status(reliable: bool) -> i32 {
    if reliable {
        0
    } else {
        eprintln!(
            "warning: more than 5% of trials reached the horizon cap; results are unreliable"
        );
        EXIT_UNRELIABLE
    }
}

/// Runs one parsed command and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Calibrate(args) => {
            let rc = parse_config(&args.config)?;
            let report = commands::cmd_calibrate(&rc)?;
            let (path, format) = (
                args.output.out.clone(),
                args.output.format.unwrap_or(Format::Csv),
            );
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
                Format::Csv => report.to_text(),
            };
            write_destination(path.as_deref(), text.as_bytes())?;
            Ok(0)
        }
        Command::Simulate(args) => {
            let rc = load(&args.run)?;
            let (row, trials) = with_workers(args.run.workers, || commands::cmd_simulate(&rc))?;
            write_report(&rc, &args.run.output, std::slice::from_ref(&row))?;
            if let Some(dump) = &args.trial_dump {
                let mut buf = Vec::new();
                write_rows(&mut buf, Format::Csv, &Provenance::new(&rc)?, &trials)?;
                write_destination(Some(dump), &buf)?;
            }
            Ok(exit_status(row.reliable))
        }
        Command::Sweep(args) => {
            let rc = load(&args)?;
            let rows = with_workers(args.workers, || commands::cmd_sweep(&rc))?;
            write_report(&rc, &args.output, &rows)?;
            Ok(exit_status(rows.iter().all(|r| r.reliable)))
        }
        Command::SprtAsn(args) => {
            let report = commands::cmd_sprt_asn(
                args.theta0,
                args.theta1,
                args.sigma2,
                args.gamma,
                args.delta,
            )?;
            let text = match args.output.format {
                Some(Format::Json) => serde_json::to_string_pretty(&report)? + "\n",
                _ => report.to_text(),
            };
            write_destination(args.output.out.as_deref(), text.as_bytes())?;
            Ok(0)
        }
    }
}

//! Experiment CLI for the PIAG solver: configuration-driven runs with
//! machine-readable traces and summaries, plus a rate-comparison table.
//!
//! Exit codes: 0 — all requested checks passed; 1 — a check failed or an
//! output could not be produced; 2 — configuration rejected; 3 — the solver
//! diverged (a partial trace is still written).

mod compare;
mod config;
mod experiment;
mod problem_build;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Configuration violates the schema (exit 2).
    Schema(String),
    /// Output files could not be written (exit 1).
    Io(String),
    /// Anything the solver/generator layer reports (exit 1, except
    /// divergence which the runner handles itself).
    Core(piag::Error),
}

impl From<piag::Error> for CliError {
    fn from(e: piag::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "piag", version, about = "PIAG solver experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress per-run console output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Also write iterate snapshots to `<output>.iterates.csv`.
    #[arg(long, global = true)]
    trace_iterates: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON configuration.
    Run { config: PathBuf },
    /// Emit the rate table over an (eta, tau) grid.
    CompareRates { config: PathBuf },
}

enum Outcome {
    ChecksPassed(bool),
    Diverged,
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read config {}: {e}", path.display())))
}

fn real_main(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = config::parse_experiment(&read_config(config)?)?;
            let outcome = experiment::run_experiment(&cfg, cli.quiet, cli.trace_iterates)?;
            if outcome.diverged {
                Ok(Outcome::Diverged)
            } else {
                Ok(Outcome::ChecksPassed(outcome.all_passed))
            }
        }
        Command::CompareRates { config } => {
            let cfg = config::parse_compare_rates(&read_config(config)?)?;
            compare::compare_rates(&cfg, cli.quiet)?;
            Ok(Outcome::ChecksPassed(true))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(Outcome::ChecksPassed(true)) => ExitCode::from(0),
        Ok(Outcome::ChecksPassed(false)) => ExitCode::from(1),
        Ok(Outcome::Diverged) => {
            eprintln!("solver diverged; partial trace written");
            ExitCode::from(3)
        }
        Err(CliError::Schema(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shaping_filter::FilterError;

mod commands;
mod config;

use config::{Flags, RunConfig};

/// Shaping filters for Gaussian processes with rational spectral density.
#[derive(Debug, Parser)]
#[command(name = "shaping-filter", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// State-space realization, poles, partial fractions and impulse response as JSON
    Synthesize,
    /// Sample trajectories by the spectral, SDE or Itô-sum method
    Simulate,
    /// Mean-square approximation error for a list of truncation orders
    ErrorTable,
    /// Dump a truncated operator matrix
    Operator,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Filter(FilterError),
    Io(String),
}

impl From<FilterError> for CliError {
    fn from(e: FilterError) -> Self {
        CliError::Filter(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Filter(e) if e.is_numeric() => 3,
            CliError::Io(_) | CliError::Filter(FilterError::Io(_)) => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Filter(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli.flags)?;
    match cli.command {
        Command::Synthesize => commands::synthesize(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::ErrorTable => commands::error_table(&cfg),
        Command::Operator => commands::operator(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line front end: configuration, subcommand dispatch and CSV output.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use semiclassical::{Error, ErrorKind};
use thiserror::Error as ThisError;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.kind() == ErrorKind::Numerical => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bsq",
    version,
    about = "Bohr–Sommerfeld spectra and microlocal Wronskian checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override `solver.order`.
    #[arg(long, global = true, value_name = "N")]
    pub order: Option<u8>,

    /// Override `problem.hbar` with a single value.
    #[arg(long, global = true, value_name = "X")]
    pub hbar: Option<f64>,

    /// Write CSV here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Also write the effective configuration, after overrides, to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub dump_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Bohr–Sommerfeld eigenvalues at orders 0, 1, 2 with reference values.
    Spectrum,
    /// The analytic Gram determinant on an energy grid and its zeros.
    GramScan,
    /// Grid checks of the microlocal Wronskian construction.
    WronskianCheck,
    /// Reference eigenvalues from the shooting solver.
    Oracle,
    /// Largest errors against the reference solver for each `hbar`.
    Convergence,
}

/// Loads the configuration and applies command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(order) = cli.order {
        cfg.solver.order = order;
    }
    if let Some(h) = cli.hbar {
        cfg.problem.hbar = config::Hbar::One(h);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand and returns the CSV text.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    match command {
        Command::Spectrum => commands::spectrum(cfg),
        Command::GramScan => commands::gram_scan(cfg),
        Command::WronskianCheck => commands::wronskian_check(cfg),
        Command::Oracle => commands::oracle(cfg),
        Command::Convergence => commands::convergence(cfg),
    }
}

/// Full process behaviour: returns the exit code after writing output and
/// diagnostics.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("bsq: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(cli)?;
    if let Some(path) = &cli.dump_config {
        std::fs::write(path, cfg.to_toml())
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    let csv = execute(cli.command, &cfg)?;
    match &cli.out {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}

//! `hydromodes` command-line driver.

mod cache;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Format;

/// Exit status for configuration and usage problems.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERIC: u8 = 3;
/// Exit status when some ensemble members aborted.
pub const EXIT_PARTIAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "hydromodes", version, about = "Hydrodynamic-mode Galerkin toolkit for plane channel flow")]
pub struct Cli {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sweeps and ensembles.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base random seed (overrides evolution.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Table format (overrides output.format).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Reynolds number (overrides flow.reynolds).
    #[arg(long, global = true)]
    pub re: Option<f64>,
    /// Slip length (overrides flow.slip_length).
    #[arg(long, global = true)]
    pub ls: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roots of a dispersion relation.
    Dispersion(commands::DispersionArgs),
    /// Build the configured basis and report its modes.
    Basis,
    /// Critical Reynolds number and wavenumber.
    Critical(commands::CriticalArgs),
    /// Neutral Reynolds number over a wavevector grid.
    NeutralCurve(commands::NeutralArgs),
    /// Critical state as a function of slip length.
    SlipSweep(commands::SweepArgs),
    /// Integrate one trajectory.
    Evolve(commands::EvolveArgs),
    /// Integrate an ensemble of trajectories.
    Ensemble(commands::EnsembleArgs),
    /// Observables of a checkpointed state.
    Diagnose(commands::DiagnoseArgs),
    /// Velocity and vorticity on a grid.
    ExportField(commands::ExportArgs),
}

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Raised after partial ensemble output has been written.
#[derive(Debug)]
pub struct PartialEnsemble(pub usize, pub usize);

impl std::fmt::Display for PartialEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} of {} trajectories completed", self.0, self.1)
    }
}

impl std::error::Error for PartialEnsemble {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    if err.downcast_ref::<PartialEnsemble>().is_some() {
        return EXIT_PARTIAL;
    }
    if let Some(e) = err.downcast_ref::<hydromodes::Error>() {
        if e.is_numeric() {
            return EXIT_NUMERIC;
        }
        if matches!(e, hydromodes::Error::InvalidParameter(_) | hydromodes::Error::OutOfDomain(_)) {
            return EXIT_USAGE;
        }
    }
    if err.chain().any(|c| c.downcast_ref::<toml::de::Error>().is_some()) {
        return EXIT_USAGE;
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

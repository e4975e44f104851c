//! Command-line layer: configuration, commands and output writers.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use pcqed_core::{Error, SubtractionScheme};

use crate::commands::Outcome;
use crate::config::LoadedConfig;

#[derive(Debug, Parser)]
#[command(name = "pcqed", version, about = "Photonic-crystal electron mass and ionization-energy corrections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Primary output file; overrides the configured path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads, 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Band inclusion cutoff in eV.
    #[arg(long, global = true)]
    pub omega_max: Option<f64>,

    /// Vacuum subtraction: `mode` or `freq`.
    #[arg(long, global = true)]
    pub scheme: Option<SubtractionScheme>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band surface CSV, host index curve and optional Fourier dump.
    Bands,
    /// Mass coefficients A and B as a JSON report.
    Mass,
    /// Shifted ionization energies.
    Ionize {
        /// Use this shift (eV) instead of computing it.
        #[arg(long, allow_hyphen_values = true)]
        delta_e: Option<f64>,
    },
    /// Ionization shift against host index.
    Sweep,
    /// Invariant checks on the configured stack.
    Check,
}

/// Exit code for a failed run: 3 for numerical trouble, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NotConverged { .. } | Error::RootCount { .. } | Error::OffShell { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

pub fn load(cli: &Cli) -> anyhow::Result<LoadedConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("--config is required"))?;
    let mut loaded = LoadedConfig::load(path)?;
    if let Some(w) = cli.omega_max {
        anyhow::ensure!(w > 0.0, "--omega-max must be positive");
        loaded.config.regularization.omega_max = w;
    }
    if let Some(s) = cli.scheme {
        loaded.config.regularization.scheme = s;
    }
    Ok(loaded)
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let loaded = load(cli)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build()?;
    let out = cli.out.as_deref();
    pool.install(|| match &cli.command {
        Command::Bands => commands::cmd_bands(&loaded, out),
        Command::Mass => commands::cmd_mass(&loaded, out),
        Command::Ionize { delta_e } => commands::cmd_ionize(&loaded, out, *delta_e),
        Command::Sweep => commands::cmd_sweep(&loaded, out),
        Command::Check => commands::cmd_check(&loaded, out),
    })
}

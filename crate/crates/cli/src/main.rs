//! `nucdyn`: build, transform, compile, simulate and analyze grid-based
//! proton-transfer dynamics from a TOML run configuration.

mod commands;
mod config;
mod output;
mod plot;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "nucdyn", version, about = "Grid-based nuclear dynamics on simulated trapped-ion circuits")]
struct Cli {
    /// TOML run configuration (schema_version = 1); defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the grid Hamiltonian and its eigenvalues.
    Build {
        /// `builtin_dmanh`, `harmonic`, `box`, or a potential CSV path.
        #[arg(long)]
        potential: Option<String>,
    },
    /// Block-diagonalize the Hamiltonian and fit Ising parameters.
    Transform {
        /// Entry-list CSV written by `build`, instead of building from the config.
        #[arg(long, value_name = "PATH")]
        hamiltonian: Option<PathBuf>,
    },
    /// Compile block propagators at one time into gate programs.
    Compile {
        #[arg(long, value_name = "PATH")]
        hamiltonian: Option<PathBuf>,
        /// Evolution time in fs.
        #[arg(long, default_value_t = 1.0)]
        t_fs: f64,
        /// Rewrite CNOTs in the native Mølmer–Sørensen gate set.
        #[arg(long)]
        ms: bool,
        /// Also emit a first-order Trotter program of the fitted Ising model.
        #[arg(long, value_name = "N")]
        trotter_steps: Option<usize>,
    },
    /// Propagate one or more initial states and write site-probability series.
    Simulate {
        #[arg(long, value_name = "PATH")]
        hamiltonian: Option<PathBuf>,
        /// Initial state `site:k`, `eigenstate:k` or `two_site:i:j:phase`; repeatable.
        #[arg(long = "initial", value_name = "SPEC")]
        initial: Vec<String>,
        /// Write per-timestep block programs (circuit backends).
        #[arg(long)]
        emit_programs: bool,
    },
    /// Fourier-analyze series, detect peaks and reconstruct the level ladder.
    Spectrum {
        #[arg(required = true, value_name = "SERIES_CSV")]
        series: Vec<PathBuf>,
        #[arg(long, value_name = "PATH")]
        hamiltonian: Option<PathBuf>,
    },
    /// Reconstruct the level ladder from peak CSVs.
    Ladder {
        #[arg(required = true, value_name = "PEAKS_CSV")]
        peaks: Vec<PathBuf>,
        #[arg(long, value_name = "PATH")]
        hamiltonian: Option<PathBuf>,
    },
    /// Tensor-train propagation of a coupled two-mode model against dense evolution.
    MpsDemo,
}

/// Error carrying the process exit code: 2 configuration, 3 numeric,
/// 4 under-constrained analysis.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::config(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<nucdyn::Error> for CliError {
    fn from(e: nucdyn::Error) -> Self {
        let code = match e {
            nucdyn::Error::Numeric(_) => 3,
            nucdyn::Error::UnderConstrained { .. } => 4,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let out = output::OutputDir::create(&cfg.output_dir, cli.quiet)?;
    let ctx = commands::Context {
        cfg,
        out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Build { potential } => commands::build(ctx, potential),
        Command::Transform { hamiltonian } => commands::transform(&ctx, hamiltonian.as_deref()),
        Command::Compile {
            hamiltonian,
            t_fs,
            ms,
            trotter_steps,
        } => commands::compile(&ctx, hamiltonian.as_deref(), t_fs, ms, trotter_steps),
        Command::Simulate {
            hamiltonian,
            initial,
            emit_programs,
        } => commands::simulate(&ctx, hamiltonian.as_deref(), &initial, emit_programs),
        Command::Spectrum { series, hamiltonian } => commands::spectrum(&ctx, &series, hamiltonian.as_deref()),
        Command::Ladder { peaks, hamiltonian } => commands::ladder(&ctx, &peaks, hamiltonian.as_deref()),
        Command::MpsDemo => commands::mps_demo(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

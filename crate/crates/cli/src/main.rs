//! `mcdicke`: mean-field scans, criticality checks, Gaussian fluctuations,
//! exact diagonalization and critical-entropy fits from the command line.
//!
//! Exit status: 0 on success, 1 on a numerical failure, 2 on bad input.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcdicke::Error;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "mcdicke", version, about = "Multicritical generalized Dicke model solvers")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Model file (`.toml` is read as TOML, anything else as JSON).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed of the eigensolver start vectors.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Memory cap for grids and Hamiltonians.
    #[arg(long, global = true, default_value_t = 4096)]
    pub mem_cap_mb: usize,
    /// JSON or TOML table of flags; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Mean-field phase diagram over 1 to 3 diagonal energies.
    MfScan {
        /// `h<kk>:start:end:points`, e.g. `h22:1:3:201`; repeat for each axis.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        /// Order-parameter jump separating first from second order.
        #[arg(long, default_value_t = mcdicke::meanfield::JUMP_THRESHOLD)]
        jump_threshold: f64,
    },
    /// Criticality residuals, T-class order and Landau coefficients.
    CritCheck {
        /// Highest Landau coefficient to compute.
        #[arg(long, default_value_t = 5)]
        max_order: usize,
        /// Threshold for a vanishing coefficient.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Gaussian fluctuation spectrum at the model point or along axes.
    Fluct {
        /// `h<kk>:start:end:points`; repeat for a grid (at most 2).
        #[arg(long = "axis")]
        axes: Vec<String>,
        /// Atom number for the depletion warning.
        #[arg(long)]
        atoms: Option<f64>,
    },
    /// Finite-N ground state, gap and entanglement entropy.
    Ed {
        /// Atom numbers (comma separated or repeated).
        #[arg(long, required = true, value_delimiter = ',')]
        atoms: Vec<usize>,
        /// Photon cutoff, or `auto` to double until certified.
        #[arg(long, default_value = "auto")]
        n_max: String,
        /// `h<kk>:start:end:points`; at most one axis.
        #[arg(long = "axis")]
        axes: Vec<String>,
        /// Any of `energy`, `gap`, `entropy`, `photons`.
        #[arg(long, value_delimiter = ',', default_value = "energy,gap,entropy,photons")]
        observables: Vec<String>,
    },
    /// Maximum of the ground-state entropy over one diagonal energy.
    CritEntropy {
        #[arg(long, required = true, value_delimiter = ',')]
        atoms: Vec<usize>,
        /// Search interval `lo,hi`.
        #[arg(long, required = true)]
        bracket: String,
        /// `x0,c,p`: raise the lower end to `x0 - c N^-p` for each N.
        #[arg(long)]
        lo_rule: Option<String>,
        /// Tuned diagonal energy.
        #[arg(long, default_value = "h22")]
        param: String,
        #[arg(long, default_value_t = 32)]
        prescan: usize,
        /// Final bracket width.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Photon cutoff, or `auto`.
        #[arg(long, default_value = "auto")]
        n_max: String,
        /// Criticality order label [default: first non-vanishing Landau coefficient].
        #[arg(long)]
        order: Option<usize>,
    },
    /// Logarithmic fits `S = s0 + s1 ln N` per criticality order.
    Fit {
        /// `crit-entropy` CSV files.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::MfScan { .. } => "mf-scan",
            Command::CritCheck { .. } => "crit-check",
            Command::Fluct { .. } => "fluct",
            Command::Ed { .. } => "ed",
            Command::CritEntropy { .. } => "crit-entropy",
            Command::Fit { .. } => "fit",
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidModel(_)
        | Error::InvalidArgument(_)
        | Error::Parse(_)
        | Error::Io(_)
        | Error::NotHermitian { .. }
        | Error::ComplexCouplings
        | Error::MemoryCap { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let workers = cli
        .global
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let run = || commands::run(&cli.global, &cli.command, workers.max(1));
    match pool.install(run) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error ({}): {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}

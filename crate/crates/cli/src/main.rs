//! `wgqed`: simulate, correlate, fit and derive from the command line.
//!
//! Every subcommand reads one JSON config and writes its results plus a
//! manifest of hashes into an output directory. Exit codes: 0 success,
//! 2 bad input, 3 runtime failure, 4 fit not converged.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Overrides;
use error::CliError;

#[derive(Parser)]
#[command(name = "wgqed", version, about = "Waveguide-QED extinction and photon-statistics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum-jump simulation producing time tags and/or a frequency sweep.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// RNG seed, overriding `rng_seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Coincidence histogram and normalised g2 from time-tag files.
    Correlate {
        #[command(flatten)]
        common: Common,
    },
    /// Least-squares fit of a model to a spectrum or histogram CSV.
    Fit {
        #[command(flatten)]
        common: Common,
    },
    /// Cooperativity, beta and efficiencies from a fit or measured values.
    Derive {
        #[command(flatten)]
        common: Common,
    },
    /// Extinction line shapes over a set of interference phases.
    PhaseSweep {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, seed) = match &cli.command {
        Command::Simulate { common, seed } => (common, *seed),
        Command::Correlate { common }
        | Command::Fit { common }
        | Command::Derive { common }
        | Command::PhaseSweep { common } => (common, None),
    };
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let overrides = Overrides {
        out: common.out.clone(),
        seed,
    };
    let path = common.config.as_path();
    match cli.command {
        Command::Simulate { .. } => commands::simulate::run(path, &overrides),
        Command::Correlate { .. } => commands::correlate::run(path, &overrides),
        Command::Fit { .. } => commands::fit::run(path, &overrides),
        Command::Derive { .. } => commands::derive::run(path, &overrides),
        Command::PhaseSweep { .. } => commands::phase_sweep::run(path, &overrides),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

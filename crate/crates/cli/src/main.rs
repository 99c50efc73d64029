//! Command-line driver for the fortiloc positioning pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 input or I/O failure, 3 malformed data
//! or config, 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fortiloc_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "fortiloc",
    version,
    about = "Attack-resilient indoor positioning from Wi-Fi RSSI fingerprints"
)]
struct Cli {
    /// JSON run config; missing fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured dataset as CSV.
    Synth,
    /// Train the base and the adversarially hardened model.
    Train,
    /// Grid-search the ensemble blend weight on the validation split.
    Tune {
        /// Base model file (default: <out_dir>/base_model.json).
        #[arg(long, value_name = "PATH")]
        base: Option<PathBuf>,
        /// Robust model file (default: <out_dir>/robust_model.json).
        #[arg(long, value_name = "PATH")]
        robust: Option<PathBuf>,
    },
    /// Evaluate all three models across attack strengths and write reports.
    Sweep {
        /// Ensemble model file (default: <out_dir>/ensemble_model.json).
        #[arg(long, value_name = "PATH")]
        ensemble: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> fortiloc_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => config::load_config(path)?,
        None => config::RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }

    match &cli.command {
        Command::Synth => commands::cmd_synth(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Tune { base, robust } => {
            let base = base
                .clone()
                .unwrap_or_else(|| cfg.out_dir.join("base_model.json"));
            let robust = robust
                .clone()
                .unwrap_or_else(|| cfg.out_dir.join("robust_model.json"));
            commands::cmd_tune(&cfg, &base, &robust)
        }
        Command::Sweep { ensemble } => {
            let ensemble = ensemble
                .clone()
                .unwrap_or_else(|| cfg.out_dir.join("ensemble_model.json"));
            commands::cmd_sweep(&cfg, &ensemble)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 2,
        Error::Data(_) | Error::Invalid(_) => 3,
        Error::Numerical(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive here too; only real usage errors
            // exit nonzero.
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

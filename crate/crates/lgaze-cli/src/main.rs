//! `lgaze` — landmark-only gaze estimation pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lgaze", version, about = "Landmark-only gaze estimation pipeline")]
struct Cli {
    /// JSON run-configuration file (unknown keys rejected).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker cap for parallelizable stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root seed; component seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic landmark dataset with known ground truth.
    Synth(commands::synth::Args),
    /// Normalize raw landmark records into the virtual-camera frame.
    Normalize(commands::normalize::Args),
    /// Train a gaze regressor on a normalized dataset.
    Train(commands::train::Args),
    /// Evaluate a trained model on a dataset split.
    Eval(commands::eval::Args),
    /// Cross-domain evaluation grid over several models and datasets.
    Cross(commands::cross::Args),
    /// Grouped permutation feature importance for a trained model.
    Pfi(commands::pfi::Args),
    /// Finite-difference gradient self-check of both MLP architectures.
    Gradcheck(commands::gradcheck::Args),
}

/// Error classes mapped to exit codes.
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    Numerical(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Data(e) => format!("data error: {e:#}"),
            CliError::Numerical(e) => format!("numerical failure: {e:#}"),
        }
    }
}

pub fn data_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Data(e.into())
}

pub fn numerical_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Numerical(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are success, not usage errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let mut run_cfg = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        run_cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        run_cfg.seed = s;
        run_cfg.synth.seed = s;
        run_cfg.train.seed = s;
        run_cfg.gbt.seed = s;
    }

    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args, &run_cfg),
        Command::Normalize(args) => commands::normalize::run(args, &run_cfg),
        Command::Train(args) => commands::train::run(args, &run_cfg),
        Command::Eval(args) => commands::eval::run(args, &run_cfg),
        Command::Cross(args) => commands::cross::run(args, &run_cfg),
        Command::Pfi(args) => commands::pfi::run(args, &run_cfg),
        Command::Gradcheck(args) => commands::gradcheck::run(args, &run_cfg),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

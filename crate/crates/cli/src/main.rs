//! `pwppe` — fringe projection phase estimation pipeline.
//!
//! Subcommands cover the full flow: synthesize a fringe stack, build
//! ground-truth labels from it, assemble a training dataset, train the
//! per-pixel estimator, solve new stacks, and compare against the
//! classical solver. `repro` chains all stages from one config file.
//!
//! Exit codes: 0 ok, 2 configuration, 3 data/shape, 4 numerical
//! (divergence or degenerate fit), 5 I/O.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::SolveMethod;
use config::ExperimentConfig;
use pwppe_core::{DatasetMode, Error};

#[derive(Parser)]
#[command(name = "pwppe", version, about = "Phase estimation for fringe projection profilometry", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a phase-shifted fringe stack directory from a config.
    Synth {
        /// Experiment config file (flat key=value).
        #[arg(long)]
        config: PathBuf,
        /// Output stack directory.
        #[arg(long)]
        out: PathBuf,
        /// Quantize intensities to 8-bit levels before writing.
        #[arg(long)]
        quantize_8bit: bool,
    },
    /// Build wrapped ground-truth labels from a planar-target stack.
    Truth {
        /// Input stack directory.
        #[arg(long)]
        stack: PathBuf,
        /// Output phase-map file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build train/test datasets from a stack and its truth map.
    Build {
        #[arg(long)]
        stack: PathBuf,
        /// Wrapped truth phase-map file.
        #[arg(long)]
        truth: PathBuf,
        /// plain, augmented or accelerated.
        #[arg(long, default_value = "augmented")]
        mode: String,
        /// Fraction of the training pool to keep, in (0, 1].
        #[arg(long, default_value_t = 0.01)]
        fraction: f64,
        /// Fraction of pixels assigned to the training split, in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        train_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for train.ds / test.ds.
        #[arg(long)]
        out: PathBuf,
        /// Also export CSV copies for inspection.
        #[arg(long)]
        csv: bool,
    },
    /// Train the estimator network on a dataset.
    Train {
        /// Input dataset file (train.ds).
        #[arg(long)]
        dataset: PathBuf,
        /// Experiment config carrying the train.* settings.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for weights.pwnn and loss_history.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a stack into a wrapped phase map (and self-test map).
    Solve {
        #[arg(long)]
        stack: PathBuf,
        /// Weight file; required unless --method pwls.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// pwppe (default) or pwls.
        #[arg(long, default_value = "pwppe")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare both solvers against a truth map and emit the report set.
    Eval {
        #[arg(long)]
        stack: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Row for the error profile; defaults to the middle row.
        #[arg(long)]
        row: Option<usize>,
    },
    /// Full pipeline from one config: synth, truth, build, train, eval.
    Repro {
        #[arg(long)]
        config: PathBuf,
        /// Overrides eval.out_dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> pwppe_core::Result<()> {
    match cli.command {
        Command::Synth {
            config,
            out,
            quantize_8bit,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            commands::cmd_synth(&cfg, &out, quantize_8bit)
        }
        Command::Truth { stack, out } => commands::cmd_truth(&stack, &out),
        Command::Build {
            stack,
            truth,
            mode,
            fraction,
            train_ratio,
            seed,
            out,
            csv,
        } => {
            let mode = mode.parse::<DatasetMode>()?;
            commands::cmd_build(&stack, &truth, mode, fraction, train_ratio, seed, &out, csv)
        }
        Command::Train {
            dataset,
            config,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            commands::cmd_train(&dataset, &cfg, &out)
        }
        Command::Solve {
            stack,
            weights,
            method,
            out,
        } => {
            let method = method.parse::<SolveMethod>()?;
            commands::cmd_solve(&stack, weights.as_deref(), method, &out)
        }
        Command::Eval {
            stack,
            truth,
            weights,
            out,
            row,
        } => commands::cmd_eval(&stack, &truth, &weights, &out, row),
        Command::Repro { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            commands::cmd_repro(&cfg, out.as_deref())
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Shape(_) | Error::ZeroModulation(_) | Error::EmptyDataset(_) | Error::EmptyInput(_) => 3,
        Error::DegenerateFit(_) | Error::TrainingDiverged { .. } => 4,
        Error::Format { .. } | Error::Version { .. } | Error::Io(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

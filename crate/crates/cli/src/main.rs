//! `uavgrid`: reproducible experiments over the simulator, the forecaster
//! and the genetic optimizer.
//!
//! Exit codes: 0 success, 1 internal error, 2 configuration or input error,
//! 3 training divergence, 4 artifact (checkpoint or state) mismatch.

mod evaluate;
mod manifest;
mod simulate;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Artifact(String),
}

#[derive(Parser, Debug)]
#[command(name = "uavgrid", version, about = "Solar small cells relieved by a UAV fleet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that writes a run directory.
#[derive(clap::Args, Debug, Clone)]
pub struct OutputArgs {
    /// Run directory for results and the manifest.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Reuse a non-empty run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    ExtraUsers,
    Fleet,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Budget {
    /// Narrowed search space and short training, minutes on a laptop.
    Desk,
    /// Full search space and training budget.
    Full,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the hour-stepped simulation and the figure sweeps.
    Simulate {
        /// Scenario JSON; the built-in standard scenario when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sweep settings JSON.
        #[arg(long)]
        sweeps: Option<PathBuf>,
        /// Solar trace CSV (station,day,hour,energy_j) replacing the synthetic traces.
        #[arg(long)]
        solar: Option<PathBuf>,
        /// Overrides the config's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Force fleet size 0.
        #[arg(long)]
        no_uav: bool,
        /// Run only this sweep besides the main simulation.
        #[arg(long, value_enum)]
        sweep: Option<SweepKind>,
        /// Forecaster checkpoint driving the deficit trigger.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write the per-hour trace as newline-delimited JSON.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evolve forecaster hyperparameters and drone allocations.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Solar trace CSV to train against.
        #[arg(long, conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// Use synthetic solar data.
        #[arg(long)]
        synthetic: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long, value_enum, default_value = "desk")]
        budget: Budget,
        /// Continue from a saved GA state.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Score a checkpoint on held-out data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Hourly series CSV (hour,users,energy_j).
        #[arg(long, conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// Score on the held-out tail of the synthetic diurnal task.
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Where to write the metrics JSON.
        #[arg(long, default_value = "metrics.json")]
        out: PathBuf,
    },
    /// Continue training a checkpoint on new data.
    Retrain {
        #[arg(long)]
        model: PathBuf,
        /// Hourly series CSV (hour,users,energy_j).
        #[arg(long, conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// Train on the synthetic diurnal task.
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use uavgrid_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Input(_) => 2,
                CliError::Artifact(_) => 4,
            };
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config { .. }
                | E::Parse { .. }
                | E::Duplicate { .. }
                | E::Shape(_)
                | E::Io(_)
                | E::Json(_)
                | E::Csv(_) => 2,
                E::Divergence { .. } => 3,
                E::Checkpoint(_) => 4,
                E::Domain(_) | E::Singularity(_) | E::Invariant(_) => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Simulate {
            config,
            sweeps,
            solar,
            seed,
            no_uav,
            sweep,
            model,
            trace,
            output,
        } => simulate::run(simulate::Args {
            config,
            sweeps,
            solar,
            seed,
            no_uav,
            sweep,
            model,
            trace,
            output,
            argv: args,
        }),
        Command::Train {
            config,
            data,
            synthetic,
            seed,
            generations,
            population,
            budget,
            resume,
            output,
        } => train::run(train::Args {
            config,
            data,
            synthetic,
            seed,
            generations,
            population,
            budget,
            resume,
            output,
            argv: args,
        }),
        Command::Evaluate {
            model,
            data,
            synthetic,
            seed,
            out,
        } => evaluate::run(&model, data.as_deref(), synthetic, seed, &out),
        Command::Retrain {
            model,
            data,
            synthetic,
            seed,
            epochs,
            output,
        } => train::retrain(train::RetrainArgs {
            model,
            data,
            synthetic,
            seed,
            epochs,
            output,
            argv: args,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

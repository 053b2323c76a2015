mod artifacts;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{EvalArgs, GenDataArgs, PretrainArgs, RftArgs, TrainWmArgs};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "wmrft",
    about = "World-model-verified flow-policy fine-tuning on a toy push task",
    disable_version_flag = true
)]
struct Cli {
    /// Worker threads for rollouts and evaluation; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Print tool and file-format versions.
    #[arg(long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an offline dataset of noisy expert chunks.
    GenData(GenDataArgs),
    /// Train the world model on a dataset.
    TrainWm(TrainWmArgs),
    /// Pretrain the flow-matching policy on a dataset.
    PretrainPolicy(PretrainArgs),
    /// Fine-tune a pretrained policy with world-model-verified rewards.
    Rft(RftArgs),
    /// Measure success rate of a policy under a perturbation.
    Eval(EvalArgs),
}

fn version_line() -> String {
    format!(
        "{} {} (dataset format {}, checkpoint format {})",
        artifacts::TOOL,
        env!("CARGO_PKG_VERSION"),
        wmrft_core::toyworld::dataset::FORMAT_VERSION,
        wmrft_core::nn::checkpoint::FORMAT_VERSION,
    )
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.version {
        println!("{}", version_line());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no subcommand given; see --help".into()));
    };
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    match command {
        Command::GenData(a) => commands::gen_data(a, cli.threads),
        Command::TrainWm(a) => commands::train_wm(a, cli.threads),
        Command::PretrainPolicy(a) => commands::pretrain_policy(a, cli.threads),
        Command::Rft(a) => commands::rft(a, cli.threads),
        Command::Eval(a) => commands::eval(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

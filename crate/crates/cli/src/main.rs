use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hvacopt::config::ExperimentConfig;
use hvacopt::pipeline::{self, Workspace};
use hvacopt::PipelineError;

/// Data-driven building energy control: simulate a synthetic multi-zone
/// plant, train a recurrent surrogate, fit the RC baseline, optimize
/// setpoints in closed loop, and report the comparisons.
#[derive(Parser)]
#[command(name = "hvacopt", version, about)]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master data seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the workspace (output) directory from the config.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic training corpus (profile.csv).
    Simulate,
    /// Train the recurrent surrogate (model.json, train_history.json).
    Train,
    /// Fit the first-order RC baseline (rc_params.json).
    FitRc,
    /// Run the closed-loop controller comparison (metrics_*.json).
    Control,
    /// Emit fit/energy/sweep reports, plot CSVs, and SVG renders.
    Report,
    /// Run simulate, train, fit-rc, control, and report in order.
    RunAll,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.data.seed = seed;
    }
    let dir = cli
        .workspace
        .clone()
        .unwrap_or_else(|| config.paths.workspace.clone());
    let ws = Workspace::new(config, dir)?;
    match cli.command {
        Command::Simulate => pipeline::cmd_simulate(&ws),
        Command::Train => pipeline::cmd_train(&ws),
        Command::FitRc => pipeline::cmd_fit_rc(&ws),
        Command::Control => pipeline::cmd_control(&ws),
        Command::Report => pipeline::cmd_report(&ws),
        Command::RunAll => pipeline::run_all(&ws),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hvacopt: {e}");
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}

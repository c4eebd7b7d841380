use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use variowarp_cli::config::RunConfig;
use variowarp_cli::pipeline::{report, run_pipeline, StopAfter};
use variowarp_cli::CliError;

/// Deformation-based nonstationary kriging from regionally fitted,
/// elastically aligned variograms.
#[derive(Parser)]
#[command(name = "variowarp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for simulation and the train/test split.
    #[arg(long)]
    seed: Option<u64>,
    /// Print per-stage timings to stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a realization and export it.
    Simulate(RunArgs),
    /// Run through the regional variogram fits.
    FitVariograms(RunArgs),
    /// Run through registration (warp estimation).
    Register(RunArgs),
    /// Run through the deformed-space embedding.
    Embed(RunArgs),
    /// Run through kriging predictions.
    Krige(RunArgs),
    /// Run through prediction scores.
    Score(RunArgs),
    /// Full pipeline including the run manifest.
    Run(RunArgs),
    /// Re-emit the score table of a finished run directory.
    Report {
        /// Directory holding scores.json and manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(args: &RunArgs, stop: StopAfter) -> Result<(), CliError> {
    let (config, bytes) = RunConfig::load(&args.config)?;
    run_pipeline(
        &config,
        &bytes,
        args.out.clone(),
        args.seed,
        stop,
        args.verbose,
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => execute(a, StopAfter::Simulate),
        Command::FitVariograms(a) => execute(a, StopAfter::FitVariograms),
        Command::Register(a) => execute(a, StopAfter::Register),
        Command::Embed(a) => execute(a, StopAfter::Embed),
        Command::Krige(a) => execute(a, StopAfter::Krige),
        Command::Score(a) => execute(a, StopAfter::Score),
        Command::Run(a) => execute(a, StopAfter::Full),
        Command::Report { out } => report(out).map(|table| print!("{table}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("variowarp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

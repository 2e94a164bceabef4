use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use landmark_bench::bounds::run_verify_bounds;
use landmark_bench::curve::{run_error_experiment, write_error_curve};
use landmark_bench::embed::run_embedding_experiment;
use landmark_bench::{BoundsConfig, ExperimentConfig, Overrides, Result};

#[derive(Parser)]
#[command(
    name = "landmark-bench",
    version,
    about = "Nyström landmark selection benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean normalized approximation error against rank, per method.
    ErrorCurve(Common),
    /// Exact and landmark-based diffusion-map embeddings.
    Embed(Common),
    /// Check the expected-error bounds exhaustively on random kernels.
    VerifyBounds(Common),
}

#[derive(Args)]
struct Common {
    /// Path to a `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per method and rank (instances for verify-bounds).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    rank_min: Option<usize>,
    #[arg(long)]
    rank_max: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip one header line when reading a CSV dataset.
    #[arg(long)]
    header: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            rank_min: self.rank_min,
            rank_max: self.rank_max,
            out: self.out.clone(),
            header: self.header,
        }
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::ErrorCurve(args) => {
            let config = ExperimentConfig::load(&args.config, &args.overrides())?;
            let curve = run_error_experiment(&config)?;
            write_error_curve(&curve, &config, &config.out)
        }
        Command::Embed(args) => {
            let config = ExperimentConfig::load(&args.config, &args.overrides())?;
            run_embedding_experiment(&config)
        }
        Command::VerifyBounds(args) => {
            let config = BoundsConfig::load(&args.config, &args.overrides())?;
            let (report, written) = run_verify_bounds(&config)?;
            println!("{} rows, {} failures", report.rows.len(), report.failures());
            Ok(written)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

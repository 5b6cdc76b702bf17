//! `qasa` command-line driver.

mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qasa_core::qasa::Variant;

#[derive(Debug, Parser)]
#[command(name = "qasa", version, about = "Quantum self-attention rebalancing pipeline")]
struct Cli {
    /// Artifact directory shared by all stages.
    #[arg(long, global = true, env = "QASA_RUN_DIR", default_value = "runs")]
    run_dir: PathBuf,

    /// TOML run configuration; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an OHLCV CSV and store it as `series.csv`.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        /// Output directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill missing bars instead of rejecting the file.
        #[arg(long)]
        forward_fill: bool,
    },
    /// Compute indicator features into `features.csv`.
    Features,
    /// Append rebalance labels to `features.csv`.
    Label,
    /// Train repeated models and write checkpoints and a summary.
    Train(TrainArgs),
    /// Backtest every trained run on the test split.
    Backtest(BacktestArgs),
    /// Aggregate run reports into one table.
    Report,
    /// Run the built-in verification suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the synthetic regime-switching OHLCV series as CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        bars: Option<usize>,
    },
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Base seed; repeats use consecutive seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct BacktestArgs {
    #[arg(long)]
    pub fee_bps: Option<f64>,
    #[arg(long)]
    pub cooldown: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let ctx = stages::Context {
        run_dir: cli.run_dir,
        config_path: cli.config,
    };
    let result = match cli.command {
        Command::Ingest { csv, out, forward_fill } => stages::ingest(&ctx, &csv, out.as_deref(), forward_fill),
        Command::Features => stages::features(&ctx),
        Command::Label => stages::label(&ctx),
        Command::Train(args) => stages::train(&ctx, &args),
        Command::Backtest(args) => stages::backtest(&ctx, &args),
        Command::Report => stages::report(&ctx),
        Command::Selftest { seed } => stages::selftest(seed),
        Command::Synth { out, seed, bars } => stages::synth(&out, seed, bars),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

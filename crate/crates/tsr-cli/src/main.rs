//! `tsr`: train, evaluate, and run the traffic-sign classifier.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "tsr",
    version,
    about = "43-class traffic-sign CNN: train, eval, predict, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a dataset tree and write the best checkpoint + curve log.
    Train(CommonArgs),
    /// Score the held-out test split of a dataset against a checkpoint.
    Eval(CommonArgs),
    /// Classify individual image files.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// Image files (PPM or PNG) to classify.
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Regenerate SVG charts from existing CSV artifacts.
    Report(CommonArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// `key = value` config file; CLI flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root: one directory per class id (0..=42).
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    /// Output directory for checkpoints, CSVs, and charts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Checkpoint path (default: <out-dir>/checkpoint.tsrn).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Master RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mini-batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Maximum number of training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f32>,
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(common) => with_config(common, commands::cmd_train),
        Command::Eval(common) => with_config(common, commands::cmd_eval),
        Command::Predict { common, images } => {
            with_config(common, |cfg| commands::cmd_predict(cfg, images))
        }
        Command::Report(common) => with_config(common, commands::cmd_report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn with_config(
    common: &CommonArgs,
    run: impl FnOnce(&config::RunConfig) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let cfg = config::parse_config(common.config.as_deref(), common)?;
    run(&cfg)
}

/// `TSR_THREADS` caps the worker lanes; 0 or unset means automatic.
fn configure_threads() {
    if let Ok(value) = std::env::var("TSR_THREADS") {
        match value.trim().parse::<usize>() {
            Ok(n) => tsr_core::par::configure_lanes(n),
            Err(_) => eprintln!("warning: ignoring unparsable TSR_THREADS={value:?}"),
        }
    }
}

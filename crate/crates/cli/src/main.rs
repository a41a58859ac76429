//! `herec`: train, evaluate, cluster, recommend, verify, serve, gen-synth.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use herec_core::Error;

#[derive(Debug, Parser)]
#[command(name = "herec", version, about = "Hyperbolic recommender with a steerable exploration hierarchy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write the checkpoint, its sidecar and split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on its test split.
    Eval(EvalArgs),
    /// Build the hierarchy tree over a checkpoint's embeddings.
    Cluster(ClusterArgs),
    /// Recommend for one user, optionally exploring the hierarchy.
    Recommend(RecommendArgs),
    /// Gradient-magnitude checks; emits a CSV grid and a summary.
    Verify(VerifyArgs),
    /// Serve the read-only HTTP API.
    Serve(ServeArgs),
    /// Generate a synthetic dataset with a planted hierarchy.
    GenSynth(GenSynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Interactions file, or a directory produced by `gen-synth`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    /// `key=value` config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Train share of each user's interactions.
    #[arg(long, default_value_t = herec_core::pipeline::DEFAULT_SPLIT_RATIO)]
    pub split: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub align_weight: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub align_users: Option<bool>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Re-split this interactions file instead of using the stored split.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Also report the most-popular baseline.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Tree output; defaults to `<checkpoint>.tree.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub user: u32,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory of UI assets served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub users: usize,
    #[arg(long, default_value_t = 300)]
    pub items: usize,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidParameter(_) => 1,
            Error::Numerical(_) | Error::Sampling(_) => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn init_logging() -> Result<(), Failure> {
    let level = std::env::var("HEREC_LOG").unwrap_or_else(|_| "info".into());
    if !["error", "warn", "info", "debug"].contains(&level.as_str()) {
        return Err(Failure::usage(format!(
            "HEREC_LOG must be one of error, warn, info, debug; got `{level}`"
        )));
    }
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = init_logging().and_then(|()| {
        log::info!("invocation: {:?}", cli.command);
        match cli.command {
            Command::Train(a) => commands::train(a),
            Command::Eval(a) => commands::eval(a),
            Command::Cluster(a) => commands::cluster(a),
            Command::Recommend(a) => commands::recommend(a),
            Command::Verify(a) => commands::verify(a),
            Command::Serve(a) => commands::serve(a),
            Command::GenSynth(a) => commands::gen_synth(a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Image-spam detection: train and run the CNN, compare against classical baselines.
///
/// Reports and predictions go to stdout; progress, warnings and tables go to stderr.
#[derive(Parser, Debug)]
#[command(name = "spamnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split the corpus, train the CNN, save a checkpoint and report on the held-out split.
    Train(TrainArgs),
    /// Score a checkpoint on the held-out split (or the whole corpus with --full).
    Evaluate(EvaluateArgs),
    /// Print `path<TAB>probability<TAB>label` for each image.
    Predict(PredictArgs),
    /// Write a seeded synthetic corpus of PPM images plus a manifest.
    Synth(SynthArgs),
    /// Run the colour-histogram and/or HOG+linear detectors on the held-out split.
    Baseline(BaselineArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    /// Corpus root containing `spam/` and `ham/` subdirectories.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Run seed; falls back to SPAMNET_SEED, then 0.
    #[arg(long, env = "SPAMNET_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Fraction of each class used for training.
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    /// Also write the report record(s) to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    /// Where to save the trained model.
    #[arg(long, default_value = "spamnet.ckpt")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.25)]
    pub dropout: f32,
    /// Probability at or above which an image is labelled spam.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f32,
    /// Also save the checkpoint every N epochs (0: only at the end).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value = "spamnet.ckpt")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f32,
    /// Evaluate on every image instead of the held-out split.
    #[arg(long)]
    pub full: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long, default_value = "spamnet.ckpt")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f32,
    /// PNG, JPEG or PPM/PGM files.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory; `spam/`, `ham/` and `manifest.tsv` are created inside.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub spam: usize,
    #[arg(long, default_value_t = 200)]
    pub ham: usize,
    #[arg(long, env = "SPAMNET_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Histogram,
    Hog,
    Both,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_enum, default_value_t = Which::Both)]
    pub which: Which,
    /// Histogram detector: number of fullest colour bins summed.
    #[arg(long, default_value_t = 8)]
    pub top_k: usize,
    /// Histogram detector: spam when the top-k mass reaches this value.
    #[arg(long, default_value_t = 0.6)]
    pub tau: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Baseline(a) => commands::baseline(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

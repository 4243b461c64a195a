//! `pvqa`: feature extraction, training, prediction, benchmarking and
//! subjective-score processing for predicted-video quality assessment.

mod backbone;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvqa_core::eval::{DEFAULT_K_PRIME, DEFAULT_TRAIN_FRACTION, DEFAULT_TRIALS};
use pvqa_core::{ErrorClass, FeatureSet};

use backbone::BackboneArgs;

#[derive(Debug, Parser)]
#[command(name = "pvqa", version, about = "Quality assessment of predicted videos")]
struct Cli {
    /// Worker threads for per-video and per-trial parallelism (default: all cores).
    #[arg(long, global = true, env = "PVQA_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract and cache PVQF feature files for every video in a manifest.
    Features(FeaturesArgs),
    /// Fit PCA + linear regression on all videos with a MOS.
    Train(TrainArgs),
    /// Score videos with a trained model.
    Predict(PredictArgs),
    /// Repeated random-split evaluation of the model and baseline metrics.
    Benchmark(BenchmarkArgs),
    /// Evaluate the model while varying K′ or the training-set size.
    Sweep(SweepArgs),
    /// Compare feature sets and the MCS/RFD error complementarity.
    Ablate(AblateArgs),
    /// Z-scores, outlier screening and MOS from raw subjective ratings.
    Subjective(SubjectiveArgs),
    /// Generate a seeded synthetic dataset with a planted MOS.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset manifest (TOML).
    #[arg(long, env = "PVQA_MANIFEST")]
    manifest: PathBuf,

    /// Directory of cached PVQF features; without it features are extracted on the fly.
    #[arg(long, env = "PVQA_FEATURES_DIR")]
    features_dir: Option<PathBuf>,

    #[command(flatten)]
    backbone: BackboneArgs,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Feature set: mcs, rfd, ssa, mcs+rfd or ssa+rfd.
    #[arg(long, env = "PVQA_FEATURE_SET", default_value = "mcs+rfd")]
    feature_set: FeatureSet,

    /// Number of principal components (clamped to the training rank).
    #[arg(long, env = "PVQA_K_PRIME", default_value_t = DEFAULT_K_PRIME)]
    k_prime: usize,
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    /// Number of random train/test splits.
    #[arg(long, env = "PVQA_SPLITS", default_value_t = DEFAULT_TRIALS)]
    splits: usize,

    /// Fraction of videos used for training in each split.
    #[arg(long, env = "PVQA_TRAIN_FRACTION", default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,

    /// Seed of the split generator.
    #[arg(long, env = "PVQA_SEED")]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReportOutputs {
    /// JSON report with per-trial metrics.
    #[arg(long, env = "PVQA_OUT")]
    out: Option<PathBuf>,

    /// CSV summary, one row per report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long, env = "PVQA_MANIFEST")]
    manifest: PathBuf,

    /// Output directory for PVQF files and their sidecars.
    #[arg(long, env = "PVQA_FEATURES_DIR")]
    features_dir: PathBuf,

    #[command(flatten)]
    backbone: BackboneArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    model: ModelArgs,

    /// Where to write the trained model.
    #[arg(long = "model", env = "PVQA_MODEL")]
    model_path: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Trained model file.
    #[arg(long, env = "PVQA_MODEL")]
    model: PathBuf,

    /// Only score these videos (repeatable).
    #[arg(long)]
    id: Vec<String>,

    /// CSV of `video_id,score`.
    #[arg(long, env = "PVQA_OUT")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    model: ModelArgs,

    #[command(flatten)]
    protocol: ProtocolArgs,

    /// Comma-separated measures: `ours` and any of mse, ssim, ms-ssim,
    /// gradient-difference, feature-mse, feature-cosine.
    #[arg(long, value_delimiter = ',', default_value = "ours")]
    metric: Vec<String>,

    #[command(flatten)]
    outputs: ReportOutputs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepKind {
    KPrime,
    TrainSize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Feature set: mcs, rfd, ssa, mcs+rfd or ssa+rfd.
    #[arg(long, env = "PVQA_FEATURE_SET", default_value = "mcs+rfd")]
    feature_set: FeatureSet,

    #[command(flatten)]
    protocol: ProtocolArgs,

    #[arg(long, value_enum)]
    kind: SweepKind,

    /// Comma-separated K′ values or training fractions; defaults to the standard grid.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,

    #[command(flatten)]
    outputs: ReportOutputs,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,

    #[arg(long, env = "PVQA_K_PRIME", default_value_t = DEFAULT_K_PRIME)]
    k_prime: usize,

    #[command(flatten)]
    protocol: ProtocolArgs,

    /// JSON with per-video MCS-only and RFD-only errors on the first split.
    #[arg(long)]
    complementarity: Option<PathBuf>,

    /// Absolute error counted as "good" in the complementarity quadrants.
    #[arg(long, default_value_t = pvqa_core::eval::COMPLEMENTARITY_THRESHOLD)]
    threshold: f64,

    #[command(flatten)]
    outputs: ReportOutputs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scale {
    MinMax,
    FixedZ,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Denominator {
    Population,
    Sample,
}

#[derive(Debug, Args)]
struct SubjectiveArgs {
    /// CSV with columns subject_id,session,video_id,score.
    #[arg(long, env = "PVQA_RATINGS")]
    ratings: PathBuf,

    /// MOS table (CSV).
    #[arg(long, env = "PVQA_OUT")]
    out: PathBuf,

    #[arg(long, value_enum, default_value = "min-max")]
    scale: Scale,

    /// Standard deviation used for per-subject Z-scores.
    #[arg(long, value_enum, default_value = "population")]
    denominator: Denominator,

    /// Random split-half rounds for the consistency check (0 skips it).
    #[arg(long, default_value_t = 0)]
    split_half: usize,

    /// Seed for the split-half rounds; required when --split-half > 0.
    #[arg(long, env = "PVQA_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory; must not exist yet.
    #[arg(long, env = "PVQA_OUT")]
    out: PathBuf,

    #[arg(long, default_value_t = 300)]
    videos: usize,

    #[arg(long, default_value_t = 4)]
    n_context: usize,

    #[arg(long, default_value_t = 16)]
    n_predicted: usize,

    #[arg(long, default_value_t = 32)]
    height: usize,

    #[arg(long, default_value_t = 32)]
    width: usize,

    /// Standard deviation of the MOS noise.
    #[arg(long, default_value_t = 3.0)]
    noise: f64,

    /// Blur sigma in pixels at the last frame of the most blurred video.
    #[arg(long, default_value_t = 3.0)]
    max_blur: f64,

    #[arg(long, env = "PVQA_SEED")]
    seed: u64,
}

/// Bad flag combinations found after parsing; exits like a clap error.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.chain().find_map(|e| e.downcast_ref::<pvqa_core::Error>()) {
        Some(e) if e.class() == ErrorClass::Numerical => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(1);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("global thread pool is configured once");
    }
    let result = match cli.command {
        Command::Features(a) => commands::features(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Subjective(a) => commands::subjective(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

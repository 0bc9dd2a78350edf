//! `xmodal`: synthetic data generation, linker training, gradient checks,
//! indexing, retrieval, evaluation and the unlinked baseline.
//!
//! Exit status is 0 on success, 1 when a computation fails, and 2 for usage
//! or input errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Error raised for bad invocations and unusable inputs.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "xmodal", version, about = "Cross-modal speaker/text linking and retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic paired dataset.
    GenSynth(GenSynthArgs),
    /// Train a linker and write checkpoints plus a loss log.
    Train(TrainArgs),
    /// Compare analytic and finite-difference gradients for every loss.
    GradCheck(GradCheckArgs),
    /// Project one modality of a dataset into a search index.
    BuildIndex(BuildIndexArgs),
    /// Rank the other modality for every query of one modality.
    Retrieve(RetrieveArgs),
    /// mAP@K and MeanR for plain and fused retrieval in both directions.
    Evaluate(EvaluateArgs),
    /// Evaluate LDA-aligned encoder embeddings without a linker.
    BaselineUnlinked(BaselineArgs),
    /// Two-dimensional PCA of embeddings, for plotting.
    #[command(name = "export-2d")]
    Export2d(Export2dArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; falls back to the config, then XMODAL_SEED.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    speakers: Option<usize>,
    #[arg(long)]
    utts: Option<usize>,
    #[arg(long)]
    prompts: Option<usize>,
    #[arg(long)]
    dim_speaker: Option<usize>,
    #[arg(long)]
    dim_text: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Per-utterance noise on speaker rows.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    text_noise: Option<f64>,
    /// Cross-modal correlation in [0, 1].
    #[arg(long)]
    correlation: Option<f64>,
    /// Global index of the first speaker, for disjoint splits.
    #[arg(long)]
    first_speaker: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Cts,
    CtsSpk,
    CtsSupcon,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Gelu,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    common_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    #[arg(long)]
    no_shuffle: bool,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    #[arg(long, env = "XMODAL_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = xmodal_core::trainer::GRAD_CHECK_TOLERANCE)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModalityArg {
    Speaker,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    S2t,
    T2s,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    Similarity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeanRankArg {
    First,
    All,
}

#[derive(Debug, Args)]
struct BuildIndexArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    modality: ModalityArg,
    /// Output directory for `<modality>.index.emb` and its manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    direction: DirectionArg,
    /// Re-rank with the top-N fused query.
    #[arg(long)]
    fused: bool,
    #[arg(long, default_value_t = xmodal_core::retrieval::DEFAULT_FUSE_N)]
    fuse_n: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    weighting: WeightingArg,
    /// Candidates kept per query.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Only this query id.
    #[arg(long)]
    query: Option<String>,
    /// JSON-lines output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    fuse_n: Option<usize>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    #[arg(long, value_enum)]
    mean_rank: Option<MeanRankArg>,
    /// Report JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Evaluation dataset directory.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[command(flatten)]
    flags: EvalFlags,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long)]
    target_dim: Option<usize>,
    #[arg(long)]
    shrinkage: Option<f64>,
    #[command(flatten)]
    flags: EvalFlags,
}

#[derive(Debug, Args)]
struct Export2dArgs {
    /// Project through this checkpoint first; raw embeddings otherwise.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// One modality only; required without a checkpoint.
    #[arg(long, value_enum)]
    modality: Option<ModalityArg>,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<xmodal_core::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynth(a) => commands::gen_synth(a),
        Command::Train(a) => commands::train(a),
        Command::GradCheck(a) => commands::grad_check(a),
        Command::BuildIndex(a) => commands::build_index(a),
        Command::Retrieve(a) => commands::retrieve(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::BaselineUnlinked(a) => commands::baseline_unlinked(a),
        Command::Export2d(a) => commands::export_2d(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

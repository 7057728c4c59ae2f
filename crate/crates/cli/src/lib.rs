//! Command-line front end: dataset generation, attention training,
//! explanation export, the post-hoc baseline, and the finite-world
//! optimality check.
//!
//! Exit codes: 0 success, 1 runtime failure (divergence, IO, a beaten
//! planted selector), 2 usage or validation error.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use gsat::train::{Ablation, TrainError};

pub mod config;
mod explain;
mod generate;
mod posthoc;
mod theorem;
mod train;

pub use config::RunConfig;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: 2, msg: msg.into() }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError { code: 1, msg: msg.into() }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let code = match &e {
            TrainError::Diverged { .. } | TrainError::Diff(_) => 1,
            TrainError::Invalid(_) | TrainError::Graph(_) => 2,
        };
        CliError { code, msg: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "gsat", version, about = "Interpretable graph classification via stochastic edge attention")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark dataset
    Generate(GenerateArgs),
    /// Train a model; writes checkpoints and a metrics CSV
    Train(TrainArgs),
    /// Rank edges of a trained checkpoint by attention
    Explain(ExplainArgs),
    /// Optimize per-graph masks against frozen pretrained models
    Posthoc(PosthocArgs),
    /// Check planted-selector optimality on an enumerable world
    Theorem(TheoremArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    #[value(name = "ba2motifs")]
    Ba2motifs,
    #[value(name = "spurious_motif")]
    SpuriousMotif,
    #[value(name = "multihouse")]
    Multihouse,
}

#[derive(clap::Args)]
pub struct GenerateArgs {
    /// Generator name
    #[arg(value_enum)]
    pub generator: GeneratorKind,
    /// Number of graphs
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Environment-label correlation strength (spurious_motif only)
    #[arg(long)]
    pub b: Option<f64>,
    /// One-hot degree node features (spurious_motif only)
    #[arg(long)]
    pub degree_features: bool,
    /// Output dataset file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    #[value(name = "gsat")]
    Gsat,
    /// Fine-tune the attention model from a pretrained backbone
    #[value(name = "gsat_star")]
    GsatStar,
    /// Plain classifier, no gates and no regularizer
    #[value(name = "backbone")]
    Backbone,
    /// Same training as backbone, named for the post-hoc workflow
    #[value(name = "posthoc_pretrain")]
    PosthocPretrain,
}

impl Mode {
    fn tag(self) -> &'static str {
        match self {
            Mode::Gsat => "gsat",
            Mode::GsatStar => "gsat_star",
            Mode::Backbone => "backbone",
            Mode::PosthocPretrain => "posthoc_pretrain",
        }
    }
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    match s {
        "none" => Ok(Ablation::None),
        "nostoch" | "no_stoch" => Ok(Ablation::NoStoch),
        "beta0" => Ok(Ablation::Beta0),
        "nostoch_beta0" | "no_stoch_beta0" => Ok(Ablation::NoStochBeta0),
        _ => {
            let lambda = s
                .strip_prefix("l1")
                .and_then(|r| r.strip_prefix([':', '=']))
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| {
                    format!("expected none, nostoch, beta0, nostoch_beta0, or l1:<weight>, got {s:?}")
                })?;
            Ok(Ablation::L1(lambda))
        }
    }
}

#[derive(clap::Args)]
pub struct TrainArgs {
    /// Dataset file
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Gsat)]
    pub mode: Mode,
    /// TOML run configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run this many consecutive seeds and append aggregate rows
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Objective ablation: none | nostoch | beta0 | nostoch_beta0 | l1:<weight>
    #[arg(long, value_parser = parse_ablation)]
    pub ablation: Option<Ablation>,
    /// Checkpoint to fine-tune from (gsat_star only)
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Final keep prior of the attention regularizer
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(clap::Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated graph indices (default: every graph)
    #[arg(long, value_delimiter = ',')]
    pub graphs: Vec<usize>,
    /// Report precision@k with this k
    #[arg(long)]
    pub topk: Option<usize>,
    /// Directory for DOT exports, one file per graph
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Write the ranked-edge report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct PosthocArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Directory holding checkpoint_seed<k>.json, one per seed
    #[arg(long)]
    pub pretrained_dir: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed (first checkpoint index)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Cap on explained test graphs (0 = all)
    #[arg(long)]
    pub limit: Option<usize>,
    /// Also sweep the sparsity weight over {0.1, 0.01, 0.001}
    #[arg(long)]
    pub sweep: bool,
    /// Skip the companion attention-training runs
    #[arg(long)]
    pub skip_companion: bool,
}

#[derive(clap::Args)]
pub struct TheoremArgs {
    /// Built-in world name
    #[arg(long, conflicts_with = "world_file")]
    pub world: Option<String>,
    /// TOML world description
    #[arg(long)]
    pub world_file: Option<PathBuf>,
    /// Comma-separated beta values
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0])]
    pub betas: Vec<f64>,
}

pub fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Generate(args) => generate::run(args),
        Command::Train(args) => train::run(args),
        Command::Explain(args) => explain::run(args),
        Command::Posthoc(args) => posthoc::run(args),
        Command::Theorem(args) => theorem::run(args),
    }
}

/// Population mean and standard deviation (n divisor, so one sample
/// reports zero spread).
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

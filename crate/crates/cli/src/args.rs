use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use coevo_core::{EngineConfig, Result};

#[derive(Debug, Parser)]
#[command(name = "coevo", version, about = "Streaming OOD detection over precomputed embeddings")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark (ID text anchors, corpus, test stream)
    Synth(SynthArgs),
    /// Run the engine over a test stream and write per-sample results
    Run(RunArgs),
    /// Compute AUROC, FPR95 and ID accuracy from a results file
    Eval(EvalArgs),
    /// Summarize a cache snapshot or a results file
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for id_text.cevt, corpus.cevt and test.cevt
    #[arg(long)]
    pub out: PathBuf,
    /// Embedding dimension
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Number of ID classes
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Number of OOD clusters
    #[arg(long, default_value_t = 5)]
    pub ood_clusters: usize,
    /// Total test samples
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// ID:OOD sample ratio, e.g. 1:1 or 1:10
    #[arg(long, default_value = "1:1")]
    pub ratio: String,
    /// Cluster concentration (noise variance 1/kappa per coordinate)
    #[arg(long, default_value_t = 40.0)]
    pub kappa: f64,
    /// Noise norm between each class text anchor and its cluster center
    #[arg(long, default_value_t = 1.4)]
    pub text_noise: f64,
    /// Corpus entries around each cluster center
    #[arg(long, default_value_t = 20)]
    pub corpus_per_center: usize,
    /// Extra noise norm of corpus entries, on top of the text noise
    #[arg(long, default_value_t = 2.0)]
    pub corpus_spread: f64,
    /// Uniformly random corpus entries
    #[arg(long, default_value_t = 10000)]
    pub corpus_random: usize,
    /// Rotation of the test stream in degrees per 100 samples
    #[arg(long, default_value_t = 0.0)]
    pub drift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Engine settings. Unset flags fall back to the config file, then to the defaults shown.
#[derive(Debug, Args, Default, Clone)]
pub struct EngineArgs {
    /// Config file of `key = value` lines; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Softmax temperature [default: 0.01]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Fusion weight in [0.5, 1) [default: 0.8]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Attention sharpness of visual queues [default: 5.5]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Slots per visual queue [default: 10]
    #[arg(long)]
    pub queue_len: Option<usize>,
    /// Negatives mined per confident sample [default: 5]
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Confidence margin in [0, 1] [default: 0.2]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Threshold window length [default: 2048]
    #[arg(long)]
    pub window: Option<usize>,
    /// Threshold histogram bins [default: 256]
    #[arg(long)]
    pub bins: Option<usize>,
    /// full | textual-only | visual-only | static [default: full]
    #[arg(long)]
    pub ablation: Option<String>,
    /// Lower margin form: alg1 | maintext [default: alg1]
    #[arg(long)]
    pub margin_form: Option<String>,
    /// Initial negative queue size [default: 100]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Initial negative selection: farthest | given-list [default: farthest]
    #[arg(long)]
    pub neg_init: Option<String>,
    /// Cap on the negative queue, or `none` [default: none]
    #[arg(long)]
    pub max_negatives: Option<String>,
    /// Seed recorded with the run [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

impl EngineArgs {
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |key: &'static str, value: Option<String>| {
            if let Some(v) = value {
                out.push((key, v));
            }
        };
        put("tau", self.tau.map(|v| v.to_string()));
        put("lambda", self.lambda.map(|v| v.to_string()));
        put("beta", self.beta.map(|v| v.to_string()));
        put("queue_len", self.queue_len.map(|v| v.to_string()));
        put("top_n", self.top_n.map(|v| v.to_string()));
        put("gamma", self.gamma.map(|v| v.to_string()));
        put("window", self.window.map(|v| v.to_string()));
        put("bins", self.bins.map(|v| v.to_string()));
        put("ablation", self.ablation.clone());
        put("lower_margin_form", self.margin_form.clone());
        put("negatives", self.negatives.map(|v| v.to_string()));
        put("neg_init", self.neg_init.clone());
        put("max_negatives", self.max_negatives.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        out
    }

    pub fn resolve(&self) -> Result<EngineConfig> {
        EngineConfig::resolve(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// ID class text embeddings
    #[arg(long)]
    pub id_text: PathBuf,
    /// Negative-word corpus embeddings
    #[arg(long)]
    pub corpus: PathBuf,
    /// Test stream embeddings
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    /// Results file to write
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the final cache state as an embedding table
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Results file produced by `run`
    #[arg(long)]
    pub results: PathBuf,
    /// Test table holding ground-truth flags
    #[arg(long)]
    pub truth: PathBuf,
    /// ID text table; enables text-argmax ID accuracy and the gamma sweep
    #[arg(long)]
    pub id_text: Option<PathBuf>,
    /// Corpus table; required by the gamma sweep
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Re-fuse recorded scores for lambda in 0.1..=0.9
    #[arg(long)]
    pub sweep_lambda: bool,
    /// Re-run the engine for gamma in 0.0..=1.0 (step 0.1)
    #[arg(long)]
    pub sweep_gamma: bool,
    /// Write the summary lines to this file as well
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Cache snapshot (embedding table) or results file
    pub path: PathBuf,
    /// Number of buckets for trajectories and growth curves
    #[arg(long, default_value_t = 10)]
    pub buckets: usize,
}

//! Command line interface: code attributes, estimate weights and effects,
//! run full evaluations, and generate synthetic corpora with known truth.

mod output;
mod run;

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use textshift::corpus::CorpusFormat;

#[derive(Parser)]
#[command(
    name = "textshift",
    version,
    about = "Importance-weighted transport of reader-response estimates between text corpora"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Code lexicon categories into corpus attributes
    Code(CodeArgs),
    /// Estimate source-to-target importance weights
    Weights(WeightsArgs),
    /// Estimate natural effects of binary attributes under saved weights
    Estimate(EstimateArgs),
    /// Run the full transport evaluation and write a report
    Eval(EvalArgs),
    /// Generate a synthetic space and corpora with enumerable truth
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> CorpusFormat {
        match f {
            FormatArg::Jsonl => CorpusFormat::Jsonl,
            FormatArg::Csv => CorpusFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FeaturesArg {
    /// One binary column per lexicon category
    Lexicon,
    /// log(1+count) of the most frequent tokens
    Bow,
    /// Pass through per-document feature vectors
    External,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
pub enum MethodArg {
    /// Source-vs-target classifier weights
    Clf,
    /// Language-model probability-ratio weights
    Lm,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
pub enum LmBackendArg {
    /// Builtin n-gram models fit on the training splits
    Ngram,
    /// External scoring endpoint with one prompt per distribution
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PresetArg {
    /// Two texts, responses 0 and 4, target mean 3
    Twopoint,
    /// Sixteen texts with a strong source-to-target shift
    Shifted,
    /// The same sixteen texts with no shift
    Noshift,
}

#[derive(Args)]
pub struct CorpusPair {
    /// Source corpus (.jsonl or .csv)
    #[arg(long)]
    pub source: PathBuf,
    /// Target corpus (.jsonl or .csv)
    #[arg(long)]
    pub target: PathBuf,
    /// Override format detection for both corpora
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Args)]
pub struct FeatureSelection {
    /// Feature family for the classifier and the naive baseline
    #[arg(long, value_enum, default_value_t = FeaturesArg::Bow)]
    pub features: FeaturesArg,
    /// Lexicon file; required with --features lexicon
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Bag-of-words vocabulary size
    #[arg(long, default_value_t = 2000)]
    pub vocab_size: usize,
}

#[derive(Args)]
pub struct MethodSelection {
    /// Weighting method
    #[arg(long, value_enum, default_value_t = MethodArg::Clf)]
    pub method: MethodArg,
    /// Language-model backend for --method lm
    #[arg(long, value_enum, default_value_t = LmBackendArg::Ngram)]
    pub lm_backend: LmBackendArg,
    /// Scoring endpoint for --lm-backend http (or TEXTSHIFT_LM_ENDPOINT)
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Source-distribution prompt for --lm-backend http
    #[arg(long)]
    pub prompt_r: Option<String>,
    /// Target-distribution prompt for --lm-backend http
    #[arg(long)]
    pub prompt_t: Option<String>,
    /// N-gram order for --lm-backend ngram
    #[arg(long, default_value_t = 2)]
    pub ngram_order: usize,
    /// Additive smoothing for --lm-backend ngram
    #[arg(long, default_value_t = 0.1)]
    pub ngram_alpha: f64,
    /// Parallel scoring requests for the http backend
    #[arg(long, default_value_t = 4)]
    pub max_parallel: usize,
}

#[derive(Args)]
pub struct CodeArgs {
    /// Corpus to code (.jsonl or .csv)
    #[arg(long)]
    pub corpus: PathBuf,
    /// Override format detection
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Lexicon file (category: pattern lines)
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct WeightsArgs {
    #[command(flatten)]
    pub corpora: CorpusPair,
    #[command(flatten)]
    pub method: MethodSelection,
    #[command(flatten)]
    pub features: FeatureSelection,
    /// Fraction of each corpus used to train the weight model
    #[arg(long, default_value_t = 0.1)]
    pub train_frac: f64,
    /// Cap stabilized weights at this quantile
    #[arg(long)]
    pub truncate_quantile: Option<f64>,
    /// Root seed for splits
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Corpus carrying responses and attributes (.jsonl or .csv)
    #[arg(long)]
    pub source: PathBuf,
    /// Override format detection
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Weights CSV produced by the weights command
    #[arg(long)]
    pub weights: PathBuf,
    /// Binary attributes to estimate effects for (comma separated)
    #[arg(long, required = true, value_delimiter = ',')]
    pub attributes: Vec<String>,
    /// Two-sided interval level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bootstrap replicates
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    /// Bootstrap seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpora: CorpusPair,
    #[command(flatten)]
    pub method: MethodSelection,
    #[command(flatten)]
    pub features: FeatureSelection,
    /// Fraction of each corpus used to train the weight model
    #[arg(long, default_value_t = 0.1)]
    pub train_frac: f64,
    /// Two-sided interval level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bootstrap replicates
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    /// Cap stabilized weights at this quantile
    #[arg(long)]
    pub truncate_quantile: Option<f64>,
    /// Root seed for splits and bootstraps
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Highest-weight texts listed in the report
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
#[command(group = ArgGroup::new("origin").required(true).args(["preset", "space"]))]
pub struct SynthArgs {
    /// Builtin space
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// JSON file holding a custom space
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Source documents to sample
    #[arg(long, default_value_t = 0)]
    pub n_source: usize,
    /// Target documents to sample
    #[arg(long, default_value_t = 0)]
    pub n_target: usize,
    /// Sampling seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

/// The error chain as one line, skipping causes a layer already spells out.
fn render_error(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if out.ends_with(&s) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&s);
    }
    out
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run::dispatch(cli) {
        eprintln!("error: {}", render_error(&e));
        std::process::exit(1);
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use incongruity_core::datagen::DonorCategory;
use incongruity_core::pipeline::Objective;
use incongruity_core::textcorpus::InsertionMode;
use incongruity_core::ModelKind;

/// Headline incongruity toolkit: corpora, dataset generation, training,
/// evaluation, scoring and serving.
///
/// Every subcommand accepts `--config FILE`, a JSON object whose keys are
/// long flag names (`donor_max` or `donor-max`). Flags given on the command
/// line take precedence over the file.
#[derive(Debug, Parser)]
#[command(name = "incongruity", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize raw JSONL articles into a corpus and vocabulary.
    Prep(PrepArgs),
    /// Print corpus statistics as JSON.
    Stats(StatsArgs),
    /// Build a balanced labeled dataset with train/dev/test splits.
    Generate(GenerateArgs),
    /// Expand articles into one (headline, paragraph) article per paragraph.
    IpExpand(IpExpandArgs),
    /// Train a detector and write its checkpoint and history.
    Train(TrainArgs),
    /// Evaluate a model on a labeled corpus and print the report.
    Eval(EvalArgs),
    /// Score one headline/body pair.
    Score(ScoreArgs),
    /// Run the HTTP scoring service.
    Serve(ServeArgs),
    /// Write a synthetic corpus with disjoint topic vocabularies.
    SynthCorpus(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON file of default flag values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Raw JSONL: {"id", "category"?, "headline": text, "body": text |
    /// "paragraphs": [text], "label"?}. Body lines are paragraphs.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Minimum token frequency for the vocabulary.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Encode with this vocabulary instead of building one.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Insert,
    Replace,
}

impl From<ModeArg> for InsertionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Insert => InsertionMode::Insert,
            ModeArg::Replace => InsertionMode::Replace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DonorArg {
    Same,
    Any,
    Different,
}

impl From<DonorArg> for DonorCategory {
    fn from(d: DonorArg) -> Self {
        match d {
            DonorArg::Same => DonorCategory::Same,
            DonorArg::Any => DonorCategory::Any,
            DonorArg::Different => DonorCategory::Different,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Fewest donor paragraphs implanted.
    #[arg(long, default_value_t = 1)]
    pub donor_min: usize,
    #[arg(long, default_value_t = 3)]
    pub donor_max: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Insert)]
    pub mode: ModeArg,
    /// Category of donor articles relative to the target.
    #[arg(long, value_enum, default_value_t = DonorArg::Same)]
    pub donor_category: DonorArg,
    /// Train, dev and test fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
    pub split: Vec<f64>,
    /// Articles per class; half the corpus when omitted.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Advertisement n-grams, one per line; needs --vocab.
    #[arg(long, value_name = "FILE", requires = "vocab")]
    pub blocklist: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct IpExpandArgs {
    /// Corpus files; each is written under the same name in --out-dir.
    #[arg(long, value_name = "FILE", required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Split each paragraph into sentences, which become the paragraphs of
    /// the expanded article; needs --vocab.
    #[arg(long, requires = "vocab")]
    pub sentences: bool,
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Rde,
    Cde,
    Hrde,
    Ahde,
    Hre,
    /// Logistic regression over similarity features.
    Linear,
}

impl ModelArg {
    pub fn kind(self) -> Option<ModelKind> {
        Some(match self {
            ModelArg::Rde => ModelKind::Rde,
            ModelArg::Cde => ModelKind::Cde,
            ModelArg::Hrde => ModelKind::Hrde,
            ModelArg::Ahde => ModelKind::Ahde,
            ModelArg::Hre => ModelKind::Hre,
            ModelArg::Linear => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Paragraph,
    Max,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Paragraph => Objective::Paragraph,
            ObjectiveArg::Max => Objective::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    /// Dev split for per-epoch AUROC and best-checkpoint selection.
    #[arg(long, value_name = "FILE")]
    pub dev: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Ahde)]
    pub model: ModelArg,
    /// Score each (headline, paragraph) pair and take the maximum.
    #[arg(long)]
    pub ip: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Default 5 for neural models, 300 for linear.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Default 1e-3 for neural models, 0.5 for linear.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 300)]
    pub d_emb: usize,
    /// Sets both recurrent widths unless --d-word or --d-para is given.
    #[arg(long, default_value_t = 64)]
    pub d_h: usize,
    #[arg(long)]
    pub d_word: Option<usize>,
    #[arg(long)]
    pub d_para: Option<usize>,
    /// Attention width; 0 uses the attended state width.
    #[arg(long, default_value_t = 0)]
    pub d_attn: usize,
    #[arg(long, default_value_t = 64)]
    pub conv_filters: usize,
    #[arg(long, default_value_t = 200)]
    pub max_paragraph_tokens: usize,
    #[arg(long, default_value_t = 40)]
    pub max_paragraphs: usize,
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Paragraph)]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint or linear model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    /// Labeled corpus.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Also write report.json, scores.csv and a manifest here.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    /// Text file holding the headline.
    #[arg(long, value_name = "FILE")]
    pub headline: PathBuf,
    /// Text file holding the body; each non-blank line is a paragraph.
    #[arg(long, value_name = "FILE")]
    pub body: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "FILE", env = "INCONGRUITY_MODEL")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE", env = "INCONGRUITY_VOCAB")]
    pub vocab: PathBuf,
    #[arg(long, default_value = "127.0.0.1", env = "INCONGRUITY_HOST")]
    pub host: String,
    #[arg(long, default_value_t = 8080, env = "INCONGRUITY_PORT")]
    pub port: u16,
    /// Allow url requests to fetch remote pages.
    #[arg(long, env = "INCONGRUITY_FETCH")]
    pub fetch: bool,
    #[arg(long, value_name = "FILE", default_value = "feedback.jsonl", env = "INCONGRUITY_FEEDBACK_LOG")]
    pub feedback_log: PathBuf,
    /// Seconds between checks for a changed checkpoint; 0 disables reloads.
    #[arg(long, default_value_t = 5)]
    pub reload_secs: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub articles: usize,
    #[arg(long, default_value_t = 5)]
    pub topics: usize,
    #[arg(long, default_value_t = 200)]
    pub words_per_topic: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

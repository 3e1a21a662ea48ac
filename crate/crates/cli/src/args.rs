use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "graphcf", version, about = "Counterfactual retrieval over semantic graphs")]
pub struct Cli {
    /// Worker threads; 1 makes every output bitwise reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory for artifacts, caches and timings.
    #[arg(long, global = true, env = "GRAPHCF_OUT", default_value = "out")]
    pub out: PathBuf,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a dataset (and optionally check labels against a taxonomy).
    Validate(ValidateArgs),
    /// Pairwise graph edit distances.
    Ged(GedArgs),
    /// Train the Siamese graph embedding on GED targets.
    Train(TrainArgs),
    /// Embed every graph with a trained model.
    Embed(EmbedArgs),
    /// Rank candidates per query and select counterfactuals.
    Retrieve(RetrieveArgs),
    /// Edit path between two graphs, as JSON and DOT.
    Explain(ExplainArgs),
    /// Score a ranking against GED ground truth.
    Eval(EvalArgs),
    /// Global edits per class transition.
    Aggregate(AggregateArgs),
    /// Pyramid-match kernel baseline ranking.
    Kernel(KernelArgs),
    /// Build a dataset of star graphs from attribute records.
    Star(StarArgs),
    /// Write the synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Concept taxonomy (child<TAB>parent lines, first line "!root <name>").
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub relation_taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub node_indel: Option<f64>,
    #[arg(long)]
    pub edge_indel: Option<f64>,
    #[arg(long)]
    pub unknown_cost: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairSelection {
    All,
    /// Only the pairs `train` samples with the same seed and count.
    Sampled,
}

#[derive(Debug, Args)]
pub struct GedArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub pairs: PairSelection,
    #[arg(long)]
    pub num_pairs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact search instead of the bipartite approximation (small graphs only).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Identity,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    None,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimilarityArg {
    Cosine,
    Euclidean,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// GED matrix CSV; defaults to <out>/ged.csv.
    #[arg(long)]
    pub ged: Option<PathBuf>,
    #[arg(long)]
    pub word_vectors: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub d_out: Option<usize>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    #[arg(long)]
    pub reify_edges: bool,
    #[arg(long)]
    pub num_pairs: Option<usize>,
    #[arg(long, value_enum, default_value = "mse")]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value = "none")]
    pub normalize_ged: NormalizeArg,
    /// Start from the 2048-dimensional preset.
    #[arg(long)]
    pub wide_preset: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to <out>/model.bin.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub word_vectors: PathBuf,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Require counterfactuals from this class.
    #[arg(long, conflicts_with = "confusion_file")]
    pub target_class: Option<String>,
    /// JSON object mapping each class to its most-confused class.
    #[arg(long)]
    pub confusion_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Embedding CSV; defaults to <out>/embeddings.csv.
    #[arg(long, conflicts_with = "ged")]
    pub embeddings: Option<PathBuf>,
    /// Rank by a GED matrix instead of embeddings.
    #[arg(long)]
    pub ged: Option<PathBuf>,
    #[command(flatten)]
    pub cost: CostArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Candidates kept in the report.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "cosine")]
    pub similarity: SimilarityArg,
    /// Only these query ids (comma separated); all graphs otherwise.
    #[arg(long, value_delimiter = ',')]
    pub queries: Vec<String>,
    /// Also write one DOT edit graph per query.
    #[arg(long)]
    pub dot: bool,
    /// Prefix for the output files (<tag>_rankings.json, <tag>_retrievals.json).
    #[arg(long)]
    pub tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub cost: CostArgs,
    #[arg(long)]
    pub query: String,
    /// Defaults to the counterfactual recorded in <out>/retrievals.json.
    #[arg(long)]
    pub counterfactual: Option<String>,
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to <out>/ged.csv.
    #[arg(long)]
    pub ged: Option<PathBuf>,
    /// Rankings JSON from `retrieve` or `kernel`; defaults to <out>/rankings.json.
    #[arg(long)]
    pub rankings: Option<PathBuf>,
    #[command(flatten)]
    pub cost: CostArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub ks: Vec<usize>,
    /// Report file stem and method column.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Defaults to <out>/retrievals.json.
    #[arg(long)]
    pub retrievals: Option<PathBuf>,
    /// Only the transition from this class.
    #[arg(long)]
    pub from: Option<String>,
    /// Only the transition to this class.
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub levels: u32,
    #[arg(long)]
    pub no_labels: bool,
}

#[derive(Debug, Args)]
pub struct StarArgs {
    /// JSON array of records with id, class_pred, entity and attributes.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "star")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = graphcf::synth::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = graphcf::synth::DEFAULT_TEMPLATES)]
    pub templates: usize,
    /// Target directory; defaults to <out>/synthetic.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

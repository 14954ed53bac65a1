use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Parser, Debug)]
#[command(name = "sinr", version, about = "Sparse interpretable node and word embeddings from communities")]
pub struct Cli {
    /// `key = value` file supplying defaults for long flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel runs (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalize an edge list and keep its largest connected component.
    BuildGraph(BuildGraph),
    /// Build a PMI-filtered co-occurrence graph from a tokenized corpus.
    BuildCooc(BuildCooc),
    /// Detect communities with multi-resolution Louvain.
    Louvain(LouvainArgs),
    /// Embed a graph by node recall.
    EmbedNr(EmbedNr),
    /// Embed a graph by factorizing its adjacency against the communities.
    EmbedMf(EmbedMf),
    /// Run an evaluation protocol and write its report.
    #[command(subcommand)]
    Eval(Eval),
    /// Inspect the dimensions of an embedding.
    #[command(subcommand)]
    Probe(Probe),
    /// Generate word-intrusion tasks and their answer key.
    IntrusionGen(IntrusionGen),
    /// Score collected intrusion annotations against a key.
    IntrusionScore(IntrusionScore),
    /// Download datasets listed in a manifest and verify their checksums.
    FetchDatasets(FetchDatasets),
}

#[derive(Args, Debug)]
pub struct GraphInput {
    /// Edge list: `u v` or `u v w` per line.
    #[arg(long)]
    pub graph: PathBuf,
    /// Keep edge weights (otherwise every edge counts once).
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args, Debug)]
pub struct OutputDir {
    /// Report directory; defaults to $SINR_OUTPUT_DIR, then the current directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BuildGraph {
    #[command(flatten)]
    pub input: GraphInput,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BuildCooc {
    /// One sentence per line, whitespace-tokenized.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 20)]
    pub min_count: u64,
    #[arg(long, default_value_t = 3)]
    pub min_length: usize,
    #[arg(long)]
    pub no_lowercase: bool,
    /// Words exempt from the length filter, one per line.
    #[arg(long)]
    pub exceptions: Option<PathBuf>,
    /// Weighted edge list of the filtered graph.
    #[arg(long)]
    pub out: PathBuf,
    /// `word<TAB>count` vocabulary file.
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct CommunityArgs {
    /// Resolution; defaults to 1 below 10,000 nodes and 5 above.
    #[arg(long, value_parser = positive, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct LouvainArgs {
    #[command(flatten)]
    pub input: GraphInput,
    #[command(flatten)]
    pub community: CommunityArgs,
    /// `node<TAB>community` output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EmbedCommon {
    #[command(flatten)]
    pub input: GraphInput,
    /// Use this partition instead of running Louvain.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[command(flatten)]
    pub community: CommunityArgs,
    /// Embedding output (text unless --binary).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub binary: bool,
}

#[derive(Args, Debug)]
pub struct EmbedNr {
    #[command(flatten)]
    pub common: EmbedCommon,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct MfArgs {
    #[arg(long, default_value_t = 3000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5e-3, value_parser = positive, allow_negative_numbers = true)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_nodes: usize,
}

#[derive(Args, Debug)]
pub struct EmbedMf {
    #[command(flatten)]
    pub common: EmbedCommon,
    #[command(flatten)]
    pub mf: MfArgs,
    /// Per-epoch loss, one value per line.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Embedder {
    Nr,
    Mf,
    Heuristics,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Gbdt,
    Logistic,
}

#[derive(Args, Debug)]
pub struct Protocol {
    #[command(flatten)]
    pub input: GraphInput,
    #[arg(long, value_enum, default_value_t = Embedder::Nr)]
    pub embed: Embedder,
    #[command(flatten)]
    pub community: CommunityArgs,
    #[command(flatten)]
    pub mf: MfArgs,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[arg(long, value_enum, default_value_t = ClassifierKind::Gbdt)]
    pub classifier: ClassifierKind,
    #[command(flatten)]
    pub output: OutputDir,
}

#[derive(Args, Debug)]
pub struct LinkPred {
    #[command(flatten)]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Args, Debug)]
pub struct NodeTask {
    #[command(flatten)]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Args, Debug)]
pub struct LabeledTask {
    #[command(flatten)]
    pub task: NodeTask,
    /// `node ... class` per line.
    #[arg(long)]
    pub labels: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum SimilarityFormatArg {
    Tsv,
    Men,
    Ws353,
    Scws,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum CategorizationFormatArg {
    Tsv,
    Bless,
}

#[derive(Args, Debug)]
pub struct Similarity {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = SimilarityFormatArg::Tsv)]
    pub format: SimilarityFormatArg,
    #[command(flatten)]
    pub output: OutputDir,
}

#[derive(Args, Debug)]
pub struct Categorize {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = CategorizationFormatArg::Tsv)]
    pub format: CategorizationFormatArg,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputDir,
}

#[derive(Args, Debug)]
pub struct Stability {
    #[command(flatten)]
    pub input: GraphInput,
    #[command(flatten)]
    pub community: CommunityArgs,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[command(flatten)]
    pub output: OutputDir,
}

#[derive(Args, Debug)]
pub struct Varnn {
    /// Two or more embeddings of the same vocabulary.
    #[arg(long, num_args = 2.., required = true)]
    pub models: Vec<PathBuf>,
    /// Neighborhood sizes.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,25,50,100")]
    pub grid: Vec<usize>,
    /// Restrict to a seeded sample of this many shared words.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputDir,
}

#[derive(Subcommand, Debug)]
pub enum Eval {
    /// Held-out edge classification accuracy.
    Linkpred(LinkPred),
    /// R² of degree regression.
    Degree(NodeTask),
    /// R² of clustering-coefficient regression.
    Clustcoef(NodeTask),
    /// R² of PageRank regression.
    Pagerank(NodeTask),
    /// NMI of spectral clusters against node classes.
    Spectral(LabeledTask),
    /// Held-out node classification accuracy.
    Classify(LabeledTask),
    /// Spearman correlation with human similarity scores.
    Similarity(Similarity),
    /// Cluster purity on a word categorization set.
    Categorize(Categorize),
    /// Mean pairwise NMI of seeded Louvain runs.
    Stability(Stability),
    /// Mean nearest-neighbor variation between models.
    Varnn(Varnn),
}

#[derive(Subcommand, Debug)]
pub enum Probe {
    /// Strongest words of one dimension.
    TopWords {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// A word's strongest dimensions with their descriptors.
    WordDims {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Words per descriptor.
        #[arg(long, default_value_t = 5)]
        describe: usize,
    },
    /// Dimensions shared by at least two of the words.
    SharedDims {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        words: Vec<String>,
        #[arg(long, default_value_t = 5)]
        describe: usize,
        /// Write the grid here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// 0/1 cells instead of values.
        #[arg(long)]
        presence: bool,
    },
}

#[derive(Args, Debug)]
pub struct IntrusionGen {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Annotator-facing task file.
    #[arg(long)]
    pub out: PathBuf,
    /// Answer key file.
    #[arg(long)]
    pub key_out: PathBuf,
    /// Model name recorded in the key (defaults to the model file name).
    #[arg(long)]
    pub model_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct IntrusionScore {
    #[arg(long)]
    pub key: PathBuf,
    /// `task_id<TAB>annotator<TAB>judgement` lines.
    #[arg(long)]
    pub annotations: PathBuf,
    #[command(flatten)]
    pub output: OutputDir,
}

#[derive(Args, Debug)]
pub struct FetchDatasets {
    /// Lines of `relative/path<TAB>url<TAB>sha256`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Base URL for manifest entries that are not absolute.
    #[arg(long)]
    pub mirror: Option<String>,
    #[arg(long)]
    pub dest: PathBuf,
    /// Download again even when a file with the right checksum exists.
    #[arg(long)]
    pub force: bool,
}

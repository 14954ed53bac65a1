use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("node {node} out of range (graph has {n} nodes)")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("graph is empty")]
    EmptyGraph,

    #[error("node {0} has no neighbors")]
    IsolatedNode(usize),

    #[error("row {0} is all zeros")]
    ZeroRow(usize),

    #[error("pagerank did not converge after {iterations} iterations (residual {residual:e})")]
    PageRankNotConverged {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("factorization diverged at epoch {epoch} with learning rate {learning_rate}; try a smaller learning rate")]
    Diverged { epoch: usize, learning_rate: f64 },

    #[error("graph has {n} nodes, above the factorization cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("could only hold out {achieved:.4} of the edges (wanted {wanted:.4}) without disconnecting the graph")]
    SplitUnreachable { achieved: f64, wanted: f64 },

    #[error("out of vocabulary: {0}")]
    OutOfVocabulary(String),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("bad binary file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PsneError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: u64 },

    #[error("line {line}: nonpositive weight {weight}")]
    NonPositiveWeight { line: usize, weight: f64 },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("node {0} is isolated")]
    IsolatedNode(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown edge ({0}, {1})")]
    UnknownEdge(usize, usize),

    #[error("empty walk")]
    EmptyWalk,

    #[error("graph with {n} nodes exceeds the dense cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("negative singular value {0}")]
    NegativeSingularValue(f64),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PsneError>;

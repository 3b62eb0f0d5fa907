use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("graph error: {0}")]
    Graph(String),
    #[error("edge index {0} out of range (graph has {1} edges)")]
    UnknownEdge(usize, usize),
    #[error("graph is disconnected; a spanning tree requires a connected graph")]
    Disconnected,
    #[error("metric graph has tied lengths; a strict metric is required")]
    TiedLengths,
    #[error("invalid permutation of edge indices: {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("edge cap exceeded: graph has {0} edges, cap is {1}")]
    EdgeCapExceeded(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("linear form is identically zero but used as a denominator")]
    ZeroDenominator,
    #[error("jet truncation order {have} is insufficient, need at least {need}")]
    InsufficientOrder { have: usize, need: usize },
    #[error("variable blocks overlap; external products need disjoint blocks")]
    OverlappingBlocks,
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),
    #[error("derivative cap exceeded: requested order {0}, cap {1}")]
    DerivativeCap(usize, usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for CoreError {
    fn from(e: serde_json::Error) -> Self {
        CoreError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;

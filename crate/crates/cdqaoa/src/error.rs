use thiserror::Error;

/// Errors produced by the simulation and experiment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("instance must have at least {min} spins, got {got}")]
    InvalidSize { got: usize, min: usize },
    #[error("invalid coupling list: expected {expected} entries, got {got}")]
    BadCouplings { expected: usize, got: usize },
    #[error("cluster tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("spectrum has a single level; the gap is undefined")]
    DegenerateSpectrum,
    #[error("operator dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("operator violates its {tag} tag (deviation {deviation:.3e})")]
    TagViolation { tag: &'static str, deviation: f64 },
    #[error("commutator tag algebra undefined for tags {0} and {1}")]
    TagAlgebra(&'static str, &'static str),
    #[error("operator is not tagged hermitian")]
    NotHermitian,
    #[error("eigendecomposition failed to converge (dim {dim})")]
    EigenFailure { dim: usize },
    #[error("parameter vectors do not match variant {variant} at depth {depth}")]
    ParamShape { variant: &'static str, depth: usize },
    #[error("depth must be at least 1")]
    BadDepth,
    #[error("all {0} restarts failed with non-finite values")]
    AllRestartsFailed(usize),
    #[error("embedding parent {parent} is not the predecessor of {child}")]
    EmbeddingMismatch {
        parent: &'static str,
        child: &'static str,
    },
    #[error("embedding parent depth {parent} does not match child depth {child}")]
    EmbeddingDepth { parent: usize, child: usize },
    #[error("residual energy undefined: e_max equals e_min")]
    UndefinedNormalization,
    #[error("level index {index} out of range ({levels} levels)")]
    LevelOutOfRange { index: usize, levels: usize },
    #[error("no records for group {0}")]
    MissingData(String),
    #[error("{instances} instances cannot fill {zones} zones")]
    TooFewInstances { instances: usize, zones: usize },
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),
    #[error("grid size must be at least 2, got {0}")]
    BadGridSize(usize),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("unknown variant label {0:?}")]
    UnknownVariant(String),
    #[error("malformed record log: {0}")]
    BadRecordLog(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

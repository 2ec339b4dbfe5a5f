use std::path::PathBuf;

/// Errors raised by the solvers, certificates and data loaders.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("point has {nonzeros} nonzeros but the sparsity budget is {budget}")]
    TooDense { nonzeros: usize, budget: usize },

    #[error("enumeration of {count} items exceeds the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("operation not supported for feasible set `{0}`")]
    UnsupportedSet(&'static str),

    #[error("non-finite objective value encountered: {0}")]
    NonFinite(String),

    #[error("malformed data in {path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("nothing to run: {0}")]
    NothingToRun(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

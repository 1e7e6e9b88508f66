use thiserror::Error;

/// Errors raised by the estimators and their supporting kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (bad index, shape mismatch, rank out of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is malformed (non-finite observed values, unparsable files).
    #[error("data error: {0}")]
    Data(String),

    /// A matrix that must have full column rank does not.
    #[error("conditioning error{}: smallest singular value {smallest:e} relative to largest {largest:e}", step.map(|k| format!(" at chain step {k}")).unwrap_or_default())]
    Conditioning {
        smallest: f64,
        largest: f64,
        step: Option<usize>,
    },

    /// The requested rank is not supported by the size of some group or feature set.
    #[error("rank {rank} infeasible: {what} has only {available}")]
    RankFeasibility {
        rank: usize,
        what: String,
        available: usize,
    },

    #[error("no shared anchor feature set across groups; use chain_fit")]
    NoSharedAnchor,

    #[error("cross-fit needs at least {needed} anchor columns (2r), found {available}")]
    FoldFeasibility { needed: usize, available: usize },

    #[error("chain step {step}: overlap has {available} subjects, rank {rank} needs at least that many")]
    OverlapFeasibility {
        step: usize,
        rank: usize,
        available: usize,
    },

    #[error("alignment infeasible: {0}")]
    AlignmentInfeasible(String),

    #[error("invalid chain plan: {0}")]
    InvalidPlan(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numerical identity that must hold did not; indicates a bug rather than bad input.
    #[error("numerical consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

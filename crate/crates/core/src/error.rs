//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two paired structures disagree on a dimension; the string names the
    /// offending component (e.g. "view M", "response").
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row {0} sums to zero and cannot be turned into proportions")]
    AllZeroRow(usize),

    #[error("non-positive entry at ({0}, {1}); log-ratio transforms need strictly positive data")]
    NonPositiveEntry(usize, usize),

    #[error("clustering needs at least 2 variables, got {0}")]
    TooFewVariables(usize),

    #[error("group {0} has no members")]
    EmptyGroup(usize),

    #[error("non-finite value encountered in {0}")]
    NonFiniteInput(String),

    #[error("coordinate descent did not converge at lambda = {0}")]
    NoConvergence(f64),

    /// A pair design matrix is rank deficient; the pair is reported as
    /// untestable, not fatal to the whole run.
    #[error("rank-deficient design for pair (g={0}, m={1})")]
    RankDeficient(usize, usize),

    #[error("p-value at index {0} is outside [0, 1]")]
    InvalidP(usize),

    #[error("requested {requested} interacting pairs but only {available} group pairs exist")]
    InsufficientGroups { requested: usize, available: usize },

    #[error("empirical Gram matrix is numerically singular")]
    SingularDesign,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code class: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::DimensionMismatch(_)
            | Error::AllZeroRow(_)
            | Error::NonPositiveEntry(_, _)
            | Error::TooFewVariables(_)
            | Error::EmptyGroup(_)
            | Error::InvalidP(_)
            | Error::InsufficientGroups { .. }
            | Error::Io(_)
            | Error::Parse { .. }
            | Error::Json(_) => 3,
            Error::NonFiniteInput(_)
            | Error::NoConvergence(_)
            | Error::RankDeficient(_, _)
            | Error::SingularDesign => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

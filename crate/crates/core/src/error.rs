use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// One gradient coordinate that disagreed with its finite-difference estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("token {0:?} contains whitespace")]
    InvalidToken(String),
    #[error("need at least 2 sentences per batch, got {0}")]
    BatchTooSmall(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("no contextual sequence for {0}")]
    MissingSequence(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sentence {0} has an empty mask")]
    EmptyMask(usize),
    #[error("cache does not match the inputs it is used with")]
    StaleCache,
    #[error("non-finite gradient in tensor {tensor}")]
    NonFiniteGradient { tensor: String },
    #[error("objective became non-finite at step {step}")]
    NonFiniteObjective { step: usize },
    #[error("objective diverged to {objective} at step {step}")]
    Diverged { step: usize, objective: f64 },
    #[error("gradient check failed at {} coordinate(s), first in {}", .0.len(), .0.first().map_or("?", |m| m.tensor.as_str()))]
    GradCheckFailed(Vec<GradMismatch>),
    #[error("zero-length vector")]
    ZeroVector,
    #[error("input is constant; correlation undefined")]
    ConstantInput,
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("class {class} has {count} examples, fewer than {folds} folds")]
    ClassTooSmall { class: usize, count: usize, folds: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Numerical failures (as opposed to bad data or configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient { .. }
                | Error::NonFiniteObjective { .. }
                | Error::Diverged { .. }
                | Error::GradCheckFailed(_)
        )
    }
}

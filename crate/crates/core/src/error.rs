use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants split into two families: input/validation problems (bad data,
/// bad hyperparameters, wrong dimensions) and runtime failures (numerical
/// breakdown during sampling, I/O). [`GmcError::is_validation`] tells them
/// apart so the CLI and the C ABI can map them to distinct codes.
#[derive(Debug, Error)]
pub enum GmcError {
    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),
    #[error("value {value} lies outside [0, 1]")]
    DomainError { value: f64 },
    #[error("omega matrix is numerically singular (condition number {condition:e})")]
    SingularOmega { condition: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("precision must be positive, got {0}")]
    NonpositivePrecision(f64),
    #[error("sigma must be positive, got {0}")]
    NonpositiveSigma(f64),
    #[error("slab precision {tau} outside [{lower}, {upper}]")]
    TauOutOfSlab { tau: f64, lower: f64, upper: f64 },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("log posterior is not finite at the current value {0}")]
    NonfiniteLogPosterior(f64),
    #[error("value {value} violates bounds ({lower}, {upper})")]
    BoundsViolation { value: f64, lower: f64, upper: f64 },
    #[error("non-finite deviance in chain {chain} at iteration {iteration}")]
    NonfiniteDeviance { chain: usize, iteration: usize },
    #[error("model error: {0}")]
    ModelError(String),
    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),
    #[error("no draws supplied")]
    EmptyDraws,
    #[error("hierarchy labels missing: {0}")]
    MissingHierarchy(String),
    #[error("unknown curve `{0}`")]
    UnknownCurve(String),
    #[error("time {time} exceeds the horizon {horizon}")]
    OutOfHorizon { time: f64, horizon: f64 },
    #[error("no observed events in {0} data")]
    NoEvents(String),
    #[error("covariate setting has {actual} entries, the fit has {expected} treatments")]
    UnknownCovariateSetting { expected: usize, actual: usize },
    #[error("unknown treatment `{0}`")]
    UnknownTreatment(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("parse error at line {line}, column `{column}`: {reason}")]
    ParseError { line: usize, column: String, reason: String },
    #[error("range error at line {line}: {reason}")]
    RangeError { line: usize, reason: String },
    #[error("line {line}: time must be positive, got {time}")]
    NegativeTime { line: usize, time: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl GmcError {
    /// True for errors caused by invalid inputs rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            GmcError::NotPositiveDefinite
                | GmcError::NonfiniteLogPosterior(_)
                | GmcError::NonfiniteDeviance { .. }
                | GmcError::ModelError(_)
                | GmcError::Io(_)
        )
    }
}

pub type Result<T, E = GmcError> = std::result::Result<T, E>;

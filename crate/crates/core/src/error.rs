use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate spline knots at quantiles {quantiles:?} (value {value})")]
    DuplicateKnots { quantiles: Vec<f64>, value: f64 },

    #[error("covariate index {index} out of range (basis has {dim} covariates)")]
    CovariateOutOfRange { index: usize, dim: usize },

    #[error("measure weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },

    #[error("rank-deficient design: column {column} lies in the span of columns {span:?}")]
    RankDeficient { column: usize, span: Vec<usize> },

    #[error("solver did not converge after {iterations} iterations (duality gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("objective is unbounded below at u = {u}")]
    Unbounded { u: f64 },

    #[error("empty Powell window: no residual within bandwidth {h:e}")]
    EmptyPowellWindow { h: f64 },

    #[error("degenerate functional: loading vector is zero")]
    DegenerateFunctional,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("B = {draws} draws is too few for level alpha = {alpha} (need B * alpha >= 1)")]
    TooFewDraws { draws: usize, alpha: f64 },

    #[error("augmented observation guard failed at u = {u}: Y_(n+1) = {y_aug} <= fitted {fitted}")]
    AugmentedGuard { u: f64, y_aug: f64, fitted: f64 },

    #[error("{failed} of {total} replications failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("CSV error at row {row}, column '{column}': {message}")]
    Csv { row: usize, column: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed artifact: {0}")]
    Artifact(String),
}

impl Error {
    /// Whether the failure stems from user-supplied data or configuration
    /// (as opposed to a numerical failure on valid input).
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DuplicateKnots { .. }
                | Error::RankDeficient { .. }
                | Error::CovariateOutOfRange { .. }
                | Error::WeightsNotNormalized { .. }
                | Error::DegenerateFunctional
                | Error::GridMismatch(_)
                | Error::TooFewDraws { .. }
                | Error::Csv { .. }
                | Error::Config(_)
                | Error::Io { .. }
                | Error::Artifact(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

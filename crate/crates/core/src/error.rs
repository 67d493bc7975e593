use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{function}: argument {value} outside the domain")]
    Domain { function: &'static str, value: f64 },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape { context: &'static str, expected: String, actual: String },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("rank deficient input: |R[{index},{index}]| = {magnitude:e} below {threshold:e}")]
    RankDeficient { index: usize, magnitude: f64, threshold: f64 },

    #[error("source {source_index} coincides with receiver {receiver_index}")]
    Singularity { source_index: usize, receiver_index: usize },

    #[error("point is off the constraint manifold (residual {residual:e} > {tolerance:e})")]
    Infeasible { residual: f64, tolerance: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape { context, expected: expected.to_string(), actual: actual.to_string() }
    }

    pub(crate) fn at(self, iteration: usize) -> Self {
        Error::AtIteration { iteration, source: Box::new(self) }
    }

    /// Strips any iteration wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

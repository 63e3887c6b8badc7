use thiserror::Error;

/// Errors raised by model construction, numerical kernels and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("model construction error: {0}")]
    Model(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    /// A Cholesky factorization met a non-positive pivot.
    #[error("numerical error in {context}: matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { context: &'static str, pivot: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// Objective evaluation failed for a specific candidate.
    #[error("objective evaluation failed for candidate with phases {phases:?}: {source}")]
    Objective {
        phases: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True for failures that come from the numerics rather than bad inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. } | Error::Numerical(_) => true,
            Error::Objective { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised by the estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("singular design: condition number {condition:.3e}")]
    SingularDesign { condition: f64 },

    #[error(
        "corrected normal matrix is not invertible (condition {condition:.3e}, min eigenvalue {min_eigenvalue:.3e}); \
         measurement-error variances are too large for this sample"
    )]
    NonInvertibleCorrection { condition: f64, min_eigenvalue: f64 },

    #[error("singular information matrix D'QD (min eigenvalue {min_eigenvalue:.3e})")]
    SingularInformation { min_eigenvalue: f64 },

    #[error("both golden-section probes failed: {0}")]
    SearchFailed(Box<Error>),

    #[error("empty sample")]
    EmptySample,

    #[error("non-stationary AR coefficient {0}")]
    NonStationary(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not hollow (diagonal entry {index} is {value})")]
    NotHollow { index: usize, value: f64 },

    #[error(
        "eigensolver did not converge after {matvecs} matrix-vector products \
         (largest relative residual {residual:.3e})"
    )]
    NoConvergence { matvecs: usize, residual: f64 },

    #[error("singular matrix (smallest eigenvalue {min_eigenvalue:.3e})")]
    Singular { min_eigenvalue: f64 },

    #[error("eigenvalue {index} of the double-centered matrix is {value:.6e}, not positive")]
    DeficientEmbedding { index: usize, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Singular { .. } | Error::DeficientEmbedding { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

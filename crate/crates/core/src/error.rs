use thiserror::Error;

/// Errors surfaced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not upper triangular (max below-diagonal magnitude {max_below:e})")]
    NotTriangular { max_below: f64 },

    #[error("QR iteration did not converge after {sweeps} sweeps (max active sub-diagonal {max_subdiag:e})")]
    Convergence { sweeps: usize, max_subdiag: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

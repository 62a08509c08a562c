//! Error type shared across the library.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds {tol:.3e}")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(
        "no admissible projection root for target (xi1={xi1}, xi2={xi2}, delta={delta}); \
         real quartic roots {roots:?}"
    )]
    NoAdmissibleRoot {
        xi1: f64,
        xi2: f64,
        delta: f64,
        roots: Vec<f64>,
    },

    #[error("projection failed at component {index}: {source}")]
    ProjectionAt {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure is numerical (as opposed to bad input or i/o).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian { .. }
                | Error::NonFinite(_)
                | Error::Eigen(_)
                | Error::Factorization(_)
                | Error::NoAdmissibleRoot { .. }
                | Error::ProjectionAt { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its domain (non-finite, wrong sign, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Mesh construction or queries on a degenerate mesh.
    #[error("mesh error: {0}")]
    Mesh(String),

    /// Point lies outside the triangulated hull.
    #[error("location ({x}, {y}) is outside the mesh hull")]
    OutsideHull { x: f64, y: f64 },

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix expected to be symmetric positive definite failed to factorize.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A likelihood or intermediate quantity evaluated to NaN/inf.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Malformed input data (CSV schema violations and the like).
    #[error("data error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, msg: String },

    /// Bad experiment or protocol configuration.
    #[error("config error: {0}")]
    Config(String),

    /// An optimizer could not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data { line: None, msg: msg.into() }
    }

    pub fn data_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Data { line: Some(line), msg: msg.into() }
    }
}

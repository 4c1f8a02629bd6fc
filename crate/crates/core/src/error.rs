use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("unknown catalog function `{0}`")]
    UnknownName(String),
    #[error("point {point} is outside the domain (margin {margin})")]
    OutOfDomain { point: String, margin: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point is not stationary (gradient norm {grad_norm:e})")]
    NotStationary { grad_norm: f64 },
    #[error("the y-domain is unbounded; a y-box is required")]
    UnboundedY,
    #[error("objective does not declare the {0} constant")]
    MissingLipschitz(&'static str),
    #[error("lambda {lambda} must be below 1/ell = {limit}")]
    LambdaTooLarge { lambda: f64, limit: f64 },
    #[error("delta {delta} is below three grid spacings ({spacing})")]
    GridTooCoarse { delta: f64, spacing: f64 },
    #[error("grid of {cells} cells exceeds the cap of {cap}")]
    GridCapExceeded { cells: f64, cap: f64 },
    #[error("max-oracle failed at outer iteration {iteration}: {source}")]
    Oracle {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("iterate left the x-domain at outer iteration {iteration}")]
    LeftDomain { iteration: usize },
    #[error("expression parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

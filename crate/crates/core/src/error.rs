use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("parameter point has {got} coordinates, operator has {expected} axes")]
    AxisCount { expected: usize, got: usize },

    #[error("parameter value {value} is not on the grid of axis {axis}")]
    OffGrid { axis: usize, value: f64 },

    #[error("parameter value {value} lies outside the range [{lo}, {hi}] of axis {axis}")]
    OutOfRange {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("grid index {index} out of bounds for axis {axis} of size {len}")]
    GridIndex { axis: usize, index: usize, len: usize },

    #[error("empty parameter axis {0}")]
    EmptyAxis(usize),

    #[error("matrix is structurally singular (empty column {0})")]
    StructurallySingular(usize),

    #[error("matrix is numerically singular at pivot {0}")]
    Singular(usize),

    #[error("non-positive pivot {value:e} at column {column}: matrix is not positive definite")]
    NotPositiveDefinite { column: usize, value: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("broken Gram matrix: quadratic form {0:e} is negative")]
    NegativeQuadraticForm(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("galerkin formulation requires an operator flagged SPD")]
    GalerkinNeedsSpd,

    #[error("rank-one correction rejected after {restarts} restarts: {reason}")]
    CorrectionRejected { restarts: usize, reason: String },

    #[error("dual rank cap {cap} exceeded at primal rank {rank} (alpha = {alpha})")]
    DualRankCap { cap: usize, rank: usize, alpha: f64 },

    #[error("sketch has K = {sketch} columns but dual tensor has {dual}")]
    SketchMismatch { sketch: usize, dual: usize },

    #[error("A(mu) is singular at grid point {point:?}")]
    SingularAt { point: Vec<usize> },

    #[error("missing coefficient column `{column}` for axis {axis} in {path}")]
    MissingColumn {
        axis: usize,
        column: String,
        path: PathBuf,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            got,
        }
    }
}

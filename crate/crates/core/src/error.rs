use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid motility: {0}")]
    InvalidMotility(String),

    #[error("motility evaluated at s = {s}, outside the tabulated range [0, {max}]")]
    OutOfTableRange { s: f64, max: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("negative density {value:.3e} in cell {cell} after explicit update (time step {dt:.3e} violates the stability bound)")]
    CflViolation { cell: usize, value: f64, dt: f64 },

    #[error("implicit nutrient step broke the maximum principle in cell {cell}: {value:.6e} outside [0, {max:.6e}]")]
    MaxPrinciple { cell: usize, value: f64, max: f64 },

    #[error("trajectory has not reached the limit: |v|_1 = {v_l1:.3e} exceeds stop threshold {threshold:.3e}; increase t_end")]
    NotAtLimit { v_l1: f64, threshold: f64 },

    #[error("diagnostic needs stored states in the samples; rerun with field recording enabled")]
    MissingStates,

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

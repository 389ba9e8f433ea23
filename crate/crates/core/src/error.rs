use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("matrix at node {node} is not symmetric (|a_ij - a_ji| = {gap:e})")]
    Asymmetric { node: usize, gap: f64 },
    #[error("time step produced NaN at node {node}")]
    NanInStep { node: usize },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Param(msg.into()))
}

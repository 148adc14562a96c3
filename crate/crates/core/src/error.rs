use thiserror::Error;

use crate::sparse::CgReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time argument required to evaluate a time-dependent coefficient")]
    MissingTime,

    #[error("non-positive diagonal entry {value} in row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },

    #[error(
        "conjugate gradient stopped after {} iterations with residual {:e}",
        .0.iterations,
        .0.final_residual_norm
    )]
    CgNotConverged(CgReport),

    #[error(
        "invalid operator at t = {t}: 1/dt + beta = {value} <= 0 at node {node}; \
         apply a gauge shift (raise beta) or reduce dt"
    )]
    InvalidOperator { t: f64, node: usize, value: f64 },

    #[error("diffusion coefficient alpha = {value} is not positive at t = {t}")]
    NonPositiveDiffusion { t: f64, value: f64 },

    #[error(
        "Picard iteration did not converge at t = {t} after {iterations} iterations \
         (last increment {increment:e}); try a smaller dt"
    )]
    PicardDiverged { t: f64, iterations: usize, increment: f64 },

    #[error("global Picard iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    OuterDiverged { iterations: usize, residual: f64 },

    #[error("no sign change of phi(mu) - mu found on the scan: {reason}")]
    NoSignChange { reason: String, scan: Vec<(f64, f64)> },
}

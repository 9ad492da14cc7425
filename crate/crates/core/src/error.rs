use thiserror::Error;

use crate::forster::RipReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate hypothesis: norm {norm:e} fell below {threshold:e}")]
    DegenerateHypothesis { norm: f64, threshold: f64 },

    #[error("index {0} was already predicted")]
    AlreadyPredicted(usize),

    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("singular map: ‖Ax‖ = {0:e}")]
    SingularMap(f64),

    #[error("radial isotropy not reached after {iterations} iterations (λ_min = {:.6e})", .report.min_dir_second_moment)]
    NoConvergence { iterations: usize, report: RipReport },

    #[error("input is not in approximate radially isotropic position (λ_min = {:.6e}, max norm deviation = {:.3e})", .0.min_dir_second_moment, .0.max_norm_dev)]
    NotRadiallyIsotropic(RipReport),

    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("parameter regime violated: {0}")]
    RegimeViolation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

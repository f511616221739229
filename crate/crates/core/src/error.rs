use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical singularity: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("population pool collapsed: spread {spread:e} after {sweeps} sweeps")]
    PoolCollapse { spread: f64, sweeps: usize },

    #[error("reflection pole: 1 + e^(-ik) g vanishes at g = {0}")]
    Pole(String),

    #[error("unphysical input: {0}")]
    Unphysical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;

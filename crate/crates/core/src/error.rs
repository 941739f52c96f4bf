use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaserError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge in {context}: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature {
        context: String,
        achieved: f64,
        requested: f64,
    },
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("distribution not normalizable: {0}")]
    NonNormalizable(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("degenerate transition: {0}")]
    Degenerate(String),
    #[error("spectrum error: {0}")]
    Spectrum(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, MaserError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(MaserError::Domain(msg.into()))
}

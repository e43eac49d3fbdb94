use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// The weak-probe response has poles at delta = +-omega2/2; requests
    /// inside the guard band around either pole are rejected.
    #[error("detuning {delta:.6e} rad/s is within {band:.6e} rad/s of a weak-probe pole at +-omega2/2")]
    Pole { delta: f64, band: f64 },

    #[error("outside validity domain: {0}")]
    Domain(String),

    #[error("does not converge: {0}")]
    NeverConverges(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

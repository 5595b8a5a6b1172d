use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("power iteration did not converge at lambda = {lambda} (residual {residual:e} after {iterations} iterations)")]
    EigenNotConverged {
        lambda: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("exhaustive search over {candidates} candidates exceeds the cap of {cap}")]
    EnumerationCap { candidates: u128, cap: u128 },

    #[error("exhaustive search requires a discrete codebook")]
    ContinuousCodebook,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

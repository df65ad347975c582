use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A closed form needs `ln(lambda_i^2)` for every mode.
    #[error("rank-deficient channel: {zero_modes} zero singular value(s)")]
    RankDeficient { zero_modes: usize },

    #[error("beta must be positive (got {0:e}, floor is 1e-12)")]
    BetaTooSmall(f64),

    #[error("channel file, line {line}: {msg}")]
    ChannelFormat { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

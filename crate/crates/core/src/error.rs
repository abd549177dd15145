use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient trace: {0}")]
    InsufficientTrace(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_round(self, round: usize) -> Self {
        match self {
            e @ Error::AtRound { .. } => e,
            e => Error::AtRound {
                round,
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by a bad configuration rather than by
    /// something that went wrong while running.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig(_) | Error::InvalidDimension(_) => true,
            Error::AtRound { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

//! Error type shared by all modules.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Mismatched vector/matrix dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A formula was evaluated outside its numeric domain
    /// (e.g. a non-positive denominator).
    #[error("numeric domain violation: {0}")]
    NumericDomain(String),

    /// An argument failed its validity precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The requested number of kernel vectors exceeds the null-space
    /// dimension of the protected matrix.
    #[error("kernel capacity exceeded: {0}")]
    Capacity(String),

    /// A party violated the message protocol or a protocol run aborted.
    #[error("protocol abort (round {round}): {reason}")]
    Protocol { round: u64, reason: String },

    /// Federated inference could not route an instance through a split.
    #[error("routing error: {0}")]
    Routing(String),

    /// Invalid run configuration; the message names the offending field.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or inconsistent dataset content.
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn protocol(round: u64, reason: impl Into<String>) -> Self {
        Error::Protocol {
            round,
            reason: reason.into(),
        }
    }
}

use thiserror::Error;

use crate::protocol::Phase;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The exact clique search visited more nodes than allowed.
    #[error("clique search exceeded its budget of {budget} nodes")]
    BudgetExceeded { budget: u64 },

    /// The graph has no primary vertex, so there is no one to serve.
    #[error("no primary vertex to serve")]
    NothingToSend,

    #[error("operation requires phase {expected:?}, state is in {found:?}")]
    WrongPhase { expected: Phase, found: Phase },

    #[error("protocol invariant violated: {0}")]
    ProtocolInvariant(String),

    #[error("run did not complete within {cap} recovery transmissions")]
    Runaway { cap: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

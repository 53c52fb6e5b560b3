use thiserror::Error;

/// Errors produced by the core toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A policy needed a link measurement that the data source does not hold.
    #[error("missing link measurement {from} -> {to}")]
    MissingPair { from: usize, to: usize },

    /// Measurements required for a decision have not all been supplied.
    #[error("incomplete measurements: missing pairs {missing:?}")]
    Incomplete { missing: Vec<(usize, usize)> },

    /// No path joins the source to the sink within the hop limit.
    #[error("trail is disconnected: no link within {horizon_b} steps leaves location {stuck_at} towards the sink")]
    Disconnected { stuck_at: usize, horizon_b: usize },

    /// A numerical solver did not reach its target.
    #[error("solver failed: {0}")]
    Solver(String),

    /// Maximum likelihood fitting failed.
    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

use thiserror::Error;

/// Error cases surfaced by the toolkit.
///
/// Variants are grouped by what went wrong, not where: callers match on the
/// kind to pick an exit path (the CLI maps `Config` to a config exit code,
/// everything else to a runtime failure).
#[derive(Debug, Error)]
pub enum Error {
    /// A spec or run configuration is malformed (empty flow list, bad lambda,
    /// missing constants). The message names the offending field.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument is outside an operation's domain (negative time, index out
    /// of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// A probability vector or matrix row failed validation at the point
    /// where it was evaluated.
    #[error("probability error: {0}")]
    Probability(String),

    /// An input exceeds a configured size cap.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A numeric routine failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A query lies outside the simulated range.
    #[error("range error: {0}")]
    Range(String),

    /// Sampling could not produce the requested data (e.g. all probe pairs
    /// coincident).
    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file's contents did not parse as the expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

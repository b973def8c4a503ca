use thiserror::Error;

/// Errors surfaced by the numerical modules.
///
/// The variants are coarse on purpose: callers (notably the CLI) map each one
/// to a distinct exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value violates a documented invariant.
    #[error("invalid parameter: {0}")]
    Config(String),
    /// Parameters are valid individually but the requested regime is not
    /// supported (e.g. a lattice too small for the requested check).
    #[error("regime violation: {0}")]
    Regime(String),
    /// A computation produced a non-finite value or failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

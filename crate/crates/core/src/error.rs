use thiserror::Error;

/// Unified error type for the whole crate.
///
/// The variants mirror the failure classes surfaced by the CLI exit
/// codes: invalid input, exceeded size cap, numerical breakdown,
/// unsupported operation, and an equilibrium basis with no members.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("size cap exceeded: {0}")]
    Size(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("empty equilibrium basis: {0}")]
    EmptyBasis(String),
}

pub type Result<T> = std::result::Result<T, Error>;

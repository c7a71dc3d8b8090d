//! Error type shared by the algorithm stages.

use alloc::string::String;

/// Errors produced by the pure algorithm stages.
///
/// IO-level failures (unreadable files, malformed headers) belong to the
/// companion crate; everything here is about inconsistent in-memory inputs.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub(crate) type Result<T> = core::result::Result<T, CoreError>;

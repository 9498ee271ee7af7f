use alloc::string::String;
use core::fmt;

/// Failure categories shared by every module.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid or inconsistent configuration value.
    Config(String),
    /// A function was called outside its documented domain.
    Usage(String),
    /// Non-finite numbers appeared during a computation.
    Numeric(String),
    /// A monitored invariant drifted beyond its tolerance.
    Invariant(String),
    /// A requested size exceeds the configured limits.
    Resource(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
            Error::Numeric(m) => write!(f, "numeric failure: {m}"),
            Error::Invariant(m) => write!(f, "invariant violation: {m}"),
            Error::Resource(m) => write!(f, "resource limit: {m}"),
        }
    }
}

impl core::error::Error for Error {}

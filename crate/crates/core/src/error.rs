use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or inconsistent dimensions.
    #[error("configuration error: {0}")]
    Config(String),
    /// A diagnostic could not be evaluated (missing inputs, lemma preconditions).
    #[error("diagnostic error: {0}")]
    Diagnostic(String),
    /// A solver failed to reach its tolerance.
    #[error("solver error: {0}")]
    Solver(String),
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::Error::Config(alloc::format!($($arg)*)) };
}
pub(crate) use config_err;

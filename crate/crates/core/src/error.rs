use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch for `{tensor}`: expected {expected}, got {got}")]
    Shape {
        tensor: String,
        expected: String,
        got: String,
    },
    #[error("invalid state: {0}")]
    State(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("non-deterministic loss: two evaluations gave {first} and {second}")]
    NonDeterministic { first: f64, second: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(
        tensor: impl Into<String>,
        expected: impl core::fmt::Debug,
        got: impl core::fmt::Debug,
    ) -> Self {
        Error::Shape {
            tensor: tensor.into(),
            expected: alloc::format!("{expected:?}"),
            got: alloc::format!("{got:?}"),
        }
    }
}

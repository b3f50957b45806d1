use thiserror::Error;

/// Errors produced across topology construction, protocol modelling,
/// compilation and scheduling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("topology is disconnected")]
    Disconnected,

    #[error("node {0} is not a QPU")]
    NotQpu(u32),

    #[error("protocol never succeeds (success probability is zero)")]
    NeverSucceeds,

    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("insufficient capacity: {needed} required, {available} available")]
    Capacity { needed: usize, available: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("gate {gate} between QPUs {a} and {b} has no usable path")]
    NoPath { gate: usize, a: u32, b: u32 },

    #[error("gate {gate} cannot be scheduled with the available resources")]
    Unschedulable { gate: usize },

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

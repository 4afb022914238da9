//! Simulator error taxonomy.

/// Errors surfaced by the runtime simulator.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    /// A parameter combination the models cannot evaluate.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller-supplied structure violates a precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A scenario file could not be read or does not describe a valid run.
    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        SimError::Contract(msg.into())
    }

    pub fn scenario(msg: impl Into<String>) -> Self {
        SimError::Scenario(msg.into())
    }
}

//! Error taxonomy shared by every engine module.

/// Errors surfaced by the labeling engine.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    /// Two feature vectors (or a vector and a model) disagree on dimension.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// An operation that requires at least one prototype got none.
    #[error("heuristic function has no prototypes")]
    EmptyHeuristic,

    /// A caller-supplied parameter set cannot be satisfied.
    #[error("configuration error: {0}")]
    Config(String),

    /// An internal precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A metric's denominator is zero for the given tally.
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
}

pub type Result<T> = std::result::Result<T, EngineError>;

impl EngineError {
    pub fn config(msg: impl Into<String>) -> Self {
        EngineError::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        EngineError::Contract(msg.into())
    }
}

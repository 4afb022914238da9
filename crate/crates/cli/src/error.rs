//! CLI error taxonomy and process exit codes.

use std::path::PathBuf;

/// Anything the `autolabel` binary can fail with.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config file contents, or an unusable parameter set.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input data (CSV rows, decision logs, metadata files).
    #[error("data error: {0}")]
    Data(String),

    /// Filesystem trouble, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Engine-side failure.
    #[error(transparent)]
    Engine(#[from] autolabel_core::EngineError),

    /// Simulator-side failure.
    #[error(transparent)]
    Sim(#[from] autolabel_sim::SimError),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration mistakes, 3 for bad inputs or
    /// I/O trouble, 1 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(autolabel_core::EngineError::Config(_)) => 2,
            CliError::Sim(autolabel_sim::SimError::Config(_)) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Sim(autolabel_sim::SimError::Scenario(_)) => 3,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_group_by_fault() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::data("x").exit_code(), 3);
        assert_eq!(
            CliError::io("f.csv", std::io::Error::new(std::io::ErrorKind::NotFound, "gone"))
                .exit_code(),
            3
        );
        assert_eq!(
            CliError::from(autolabel_core::EngineError::config("bad k")).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(autolabel_core::EngineError::contract("oops")).exit_code(),
            1
        );
        assert_eq!(
            CliError::from(autolabel_sim::SimError::scenario("unreadable")).exit_code(),
            3
        );
    }
}

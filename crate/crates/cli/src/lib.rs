//! Library behind the `autolabel` binary: configuration, dataset I/O,
//! synthetic stream generation, the end-to-end labeling pipeline, and the
//! on-disk run artifacts (decision log, trajectory, summary, manifest).

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod logfmt;
pub mod pipeline;
pub mod synthetic;

pub use error::{CliError, Result};

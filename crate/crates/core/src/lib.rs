//! Prototype-based stream auto-labeling.
//!
//! The crate implements a self-adapting labeling engine for feature-vector
//! streams. A small labeled seed set is expanded into an ensemble of
//! *heuristic functions* (bootstrap-resampled, impurity-penalized K-means
//! models whose clusters become labeled prototypes). Streamed instances are
//! labeled by confidence-weighted ensemble voting; low-confidence instances
//! accumulate in a bounded buffer that is periodically scanned for dense,
//! well-separated cohorts, which are promoted to brand-new labels at runtime.
//!
//! All numeric code is generic over the scalar type via [`Real`] (any
//! `num_traits::Float`, in practice `f32` or `f64`). Public types default
//! their scalar parameter to `f64`, so `Prototype`, `Instance`, etc. can be
//! used without turbofish in the common case.

pub mod adaptation;
pub mod clustering;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod scalar;
pub mod types;

pub use adaptation::{AdaptationConfig, EngineState, NoveltyBuffer, StreamConfig};
pub use ensemble::EnsembleConfig;
pub use error::{EngineError, Result};
pub use metrics::{build_tally, EvalTally};
pub use scalar::Real;
pub use types::{
    Chunk, DiscoveredLabel, HeuristicFunction, Instance, LabelDecision, LabelId, LabelSpace,
    Outcome, Prototype, Vote,
};

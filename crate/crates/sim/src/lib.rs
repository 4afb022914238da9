//! Analytical simulation of stream-labeling workloads on heterogeneous
//! mobile processors (fast CPU cores, slow CPU cores, one GPU).
//!
//! The crate models per-step kernel workloads with closed-form execution-time
//! equations, searches for optimal thread counts and cross-unit workload
//! divisions, and replays whole runs under six scheduling strategies with an
//! event-driven simulator that reports makespan, per-unit busy time, and
//! energy. All model math is generic over the scalar type (see
//! [`autolabel_core::Real`]); public types default to `f64`.

pub mod error;
pub mod kernel;
pub mod model;
pub mod scenario;
pub mod schedule;

pub use error::{Result, SimError};
pub use kernel::{HardwareModel, KernelKind, KernelSpec, StepWorkload, UnitClass, UnitPowers};
pub use model::{
    division_time, optimal_division, optimal_threads, parallel_time, serial_time, speedup,
    Availability, Division,
};
pub use scenario::{default_scenario, Scenario};
pub use schedule::{energy, simulate, Placement, SimReport, Strategy, UnitBusy};

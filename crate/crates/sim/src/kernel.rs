//! Workload and hardware descriptions consumed by the analytical scheduler.
//!
//! A kernel is one unit of work inside a pipeline step, characterized by its
//! serial execution time on a fast core, its slowdown on the other unit
//! classes, its parallelizable fraction, and its per-thread management
//! overhead. `n_l` — the number of active ensemble members a step must serve
//! — multiplies the parallelizable part.

use autolabel_core::Real;

use crate::error::{Result, SimError};

/// How a kernel may be executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Must run on exactly one CPU core.
    Serial,
    /// May be split across threads and offloaded.
    Parallel,
}

/// The three processor classes of the modeled machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum UnitClass {
    FastCpu,
    SlowCpu,
    Gpu,
}

/// One schedulable kernel of a pipeline step.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec<F = f64> {
    pub name: String,
    pub kind: KernelKind,
    /// Large kernels are worth a tailored work division; small ones are not.
    pub time_consuming: bool,
    /// Ensemble member this kernel instance belongs to, when it is one slice
    /// of per-member work. Drives the interleaved priority ordering.
    pub hf_id: Option<u32>,
    /// Serial execution time on one fast core at `n_l = 1`.
    pub t_ser: F,
    /// Serial execution time on one slow core.
    pub t_ser_slow: F,
    /// Accelerator execution time for the whole parallel part.
    pub t_exe_acc: F,
    /// Host-accelerator copy time paid when offloading.
    pub t_datacpy_acc: F,
    /// Thread-management overhead per engaged CPU thread.
    pub t_tm: F,
    /// Parallelizable fraction of the kernel, in [0, 1].
    pub p: F,
}

impl<F: Real> KernelSpec<F> {
    /// Serial time on a fast core (alias for the `t_ser` field, for symmetry
    /// with `t_ser_slow`).
    pub fn t_ser_fast(&self) -> F {
        self.t_ser
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(SimError::config("kernel without a name"));
        }
        let non_negative = [self.t_ser_slow, self.t_exe_acc, self.t_datacpy_acc, self.t_tm];
        if self.t_ser <= F::zero() {
            return Err(SimError::config(format!("kernel {}: t_ser must be positive", self.name)));
        }
        if non_negative.iter().any(|&t| t < F::zero()) {
            return Err(SimError::config(format!("kernel {}: negative time", self.name)));
        }
        if self.p < F::zero() || self.p > F::one() {
            return Err(SimError::config(format!("kernel {}: p outside [0, 1]", self.name)));
        }
        if self.kind == KernelKind::Serial && self.p != F::zero() {
            return Err(SimError::config(format!(
                "kernel {}: a serial kernel cannot have a parallel fraction",
                self.name
            )));
        }
        Ok(())
    }
}

/// Active/idle power draw per unit class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitPowers<F = f64> {
    pub active_fast: F,
    pub active_slow: F,
    pub active_gpu: F,
    pub idle_fast: F,
    pub idle_slow: F,
    pub idle_gpu: F,
}

impl<F: Real> Default for UnitPowers<F> {
    fn default() -> Self {
        UnitPowers {
            active_fast: F::from_f(2.0),
            active_slow: F::from_f(0.8),
            active_gpu: F::from_f(2.5),
            idle_fast: F::from_f(0.2),
            idle_slow: F::from_f(0.08),
            idle_gpu: F::from_f(0.25),
        }
    }
}

impl<F: Real> UnitPowers<F> {
    pub fn active(&self, class: UnitClass) -> F {
        match class {
            UnitClass::FastCpu => self.active_fast,
            UnitClass::SlowCpu => self.active_slow,
            UnitClass::Gpu => self.active_gpu,
        }
    }

    pub fn idle(&self, class: UnitClass) -> F {
        match class {
            UnitClass::FastCpu => self.idle_fast,
            UnitClass::SlowCpu => self.idle_slow,
            UnitClass::Gpu => self.idle_gpu,
        }
    }
}

/// The heterogeneous machine: a fast CPU cluster, a slow CPU cluster, and
/// optionally one accelerator.
#[derive(Clone, Debug, PartialEq)]
pub struct HardwareModel<F = f64> {
    pub n_fast: usize,
    pub n_slow: usize,
    pub gpu: bool,
    pub powers: UnitPowers<F>,
}

impl<F: Real> Default for HardwareModel<F> {
    fn default() -> Self {
        HardwareModel { n_fast: 4, n_slow: 4, gpu: true, powers: UnitPowers::default() }
    }
}

impl<F: Real> HardwareModel<F> {
    pub fn validate(&self) -> Result<()> {
        if self.n_fast + self.n_slow == 0 {
            return Err(SimError::config("hardware needs at least one CPU core"));
        }
        Ok(())
    }

    /// Units are indexed fast cores first, then slow cores, then the GPU.
    pub fn total_units(&self) -> usize {
        self.n_fast + self.n_slow + usize::from(self.gpu)
    }

    pub fn unit_class(&self, unit: usize) -> UnitClass {
        if unit < self.n_fast {
            UnitClass::FastCpu
        } else if unit < self.n_fast + self.n_slow {
            UnitClass::SlowCpu
        } else {
            UnitClass::Gpu
        }
    }

    pub fn unit_name(&self, unit: usize) -> String {
        match self.unit_class(unit) {
            UnitClass::FastCpu => format!("fast{unit}"),
            UnitClass::SlowCpu => format!("slow{}", unit - self.n_fast),
            UnitClass::Gpu => "gpu".to_string(),
        }
    }
}

/// One pipeline step: the kernels to run and the ensemble load they serve.
#[derive(Clone, Debug, PartialEq)]
pub struct StepWorkload<F = f64> {
    pub kernels: Vec<KernelSpec<F>>,
    /// Active ensemble members this step; scales every parallelizable part.
    pub n_l: F,
}

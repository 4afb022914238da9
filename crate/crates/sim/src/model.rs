//! Closed-form execution-time models for one kernel, plus the two small
//! optimizers built on them: thread-count selection and heterogeneous work
//! division.
//!
//! With serial time `t_ser`, parallel fraction `p`, and per-step load `n_l`:
//!
//! ```text
//! serial_time   = t_ser (1 - p) + t_ser p n_l
//! parallel_time = t_ser (1 - p) + (t_ser / n_t) p n_l
//! speedup(n_t)  = serial_time / (t_tm n_t + parallel_time)
//! division_time = t_ser (1 - p)
//!               + p n_l ( t_ser w_f / n_f
//!                       + t_ser_slow w_s / n_s
//!                       + (t_exe_acc + t_datacpy_acc) w_acc )
//! ```
//!
//! `division_time` is linear in the weights for fixed thread counts, so the
//! optimum over a weight grid sits at a corner; the grid search keeps it
//! honest when thread counts and weights interact through the thread-
//! management overhead.

use autolabel_core::Real;

use crate::error::{Result, SimError};
use crate::kernel::KernelSpec;

/// Time to run the kernel serially on one fast core.
pub fn serial_time<F: Real>(k: &KernelSpec<F>, n_l: F) -> F {
    k.t_ser * (F::one() - k.p) + k.t_ser * k.p * n_l
}

/// Time to run the kernel with `n_t` homogeneous fast threads (management
/// overhead excluded; the speedup and objectives add it).
pub fn parallel_time<F: Real>(k: &KernelSpec<F>, n_l: F, n_t: usize) -> Result<F> {
    if n_t == 0 {
        return Err(SimError::config("parallel_time needs at least one thread"));
    }
    Ok(k.t_ser * (F::one() - k.p) + (k.t_ser / F::from_count(n_t)) * k.p * n_l)
}

/// Speedup of the `n_t`-thread execution (with per-thread management
/// overhead) over the serial execution.
pub fn speedup<F: Real>(k: &KernelSpec<F>, n_l: F, n_t: usize) -> Result<F> {
    let denom = k.t_tm * F::from_count(n_t) + parallel_time(k, n_l, n_t)?;
    Ok(serial_time(k, n_l) / denom)
}

/// Thread count in `1..=max_threads` maximizing [`speedup`]; ties break
/// toward fewer threads. Returns the count and its speedup.
pub fn optimal_threads<F: Real>(
    k: &KernelSpec<F>,
    n_l: F,
    max_threads: usize,
) -> Result<(usize, F)> {
    if max_threads == 0 {
        return Err(SimError::config("optimal_threads needs max_threads >= 1"));
    }
    let mut best: Option<(usize, F)> = None;
    for n_t in 1..=max_threads {
        let s = speedup(k, n_l, n_t)?;
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((n_t, s)),
        }
    }
    Ok(best.expect("max_threads >= 1"))
}

/// A split of one kernel's parallel part across the unit classes: thread
/// counts per CPU class and work-fraction weights per class (accelerator
/// weight `w_acc` runs on the single GPU).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Division<F = f64> {
    pub n_fast: usize,
    pub n_slow: usize,
    pub w_fast: F,
    pub w_slow: F,
    pub w_acc: F,
}

impl<F: Real> Division<F> {
    /// CPU threads engaged by this division.
    pub fn threads(&self) -> usize {
        self.n_fast + self.n_slow
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_fast, self.w_slow, self.w_acc];
        if weights.iter().any(|&w| w < F::zero()) {
            return Err(SimError::config("division weights must be non-negative"));
        }
        let sum: F = weights.iter().copied().sum();
        if (sum - F::one()).abs() > F::from_f(1e-9) {
            return Err(SimError::config("division weights must sum to 1"));
        }
        if self.w_fast > F::zero() && self.n_fast == 0 {
            return Err(SimError::config("fast weight without fast threads"));
        }
        if self.w_slow > F::zero() && self.n_slow == 0 {
            return Err(SimError::config("slow weight without slow threads"));
        }
        Ok(())
    }
}

/// Execution time of the kernel under a work division. The classes work
/// concurrently, but this analytical form charges their weighted shares as a
/// sum, which upper-bounds the balanced execution and keeps the model
/// monotone in every weight.
pub fn division_time<F: Real>(k: &KernelSpec<F>, d: &Division<F>, n_l: F) -> Result<F> {
    d.validate()?;
    let mut par = F::zero();
    if d.w_fast > F::zero() {
        par = par + k.t_ser * d.w_fast / F::from_count(d.n_fast);
    }
    if d.w_slow > F::zero() {
        par = par + k.t_ser_slow * d.w_slow / F::from_count(d.n_slow);
    }
    if d.w_acc > F::zero() {
        par = par + (k.t_exe_acc + k.t_datacpy_acc) * d.w_acc;
    }
    Ok(k.t_ser * (F::one() - k.p) + k.p * n_l * par)
}

/// Units currently usable by a division search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Availability {
    pub fast: usize,
    pub slow: usize,
    pub gpu: bool,
}

/// Weight-grid resolution of [`optimal_division`]: weights move in steps of
/// `1 / DIVISION_GRID`.
pub const DIVISION_GRID: usize = 20;

/// Searches thread counts and a 0.05-step weight grid for the division
/// minimizing `t_tm * (n_fast + n_slow) + division_time`, i.e. the wall time
/// of the kernel including thread-management overhead (the GPU costs no
/// management thread). A class may have zero threads only with zero weight.
/// Exact ties prefer the lexicographically smallest
/// `(n_fast, n_slow, w_fast, w_slow, w_acc)`.
///
/// Returns the division and its objective value.
pub fn optimal_division<F: Real>(
    k: &KernelSpec<F>,
    n_l: F,
    avail: &Availability,
) -> Result<(Division<F>, F)> {
    if avail.fast == 0 && avail.slow == 0 && !avail.gpu {
        return Err(SimError::config("optimal_division with no available units"));
    }
    let grid = F::from_count(DIVISION_GRID);
    let mut best: Option<(F, (usize, usize, usize, usize, usize), Division<F>)> = None;
    for iw_f in 0..=DIVISION_GRID {
        if iw_f > 0 && avail.fast == 0 {
            continue;
        }
        for iw_s in 0..=(DIVISION_GRID - iw_f) {
            if iw_s > 0 && avail.slow == 0 {
                continue;
            }
            let iw_a = DIVISION_GRID - iw_f - iw_s;
            if iw_a > 0 && !avail.gpu {
                continue;
            }
            let fast_range: Vec<usize> =
                if iw_f == 0 { vec![0] } else { (1..=avail.fast).collect() };
            let slow_range: Vec<usize> =
                if iw_s == 0 { vec![0] } else { (1..=avail.slow).collect() };
            for &n_f in &fast_range {
                for &n_s in &slow_range {
                    let d = Division {
                        n_fast: n_f,
                        n_slow: n_s,
                        w_fast: F::from_count(iw_f) / grid,
                        w_slow: F::from_count(iw_s) / grid,
                        w_acc: F::from_count(iw_a) / grid,
                    };
                    let objective = k.t_tm * F::from_count(d.threads()) + division_time(k, &d, n_l)?;
                    let key = (n_f, n_s, iw_f, iw_s, iw_a);
                    let better = match &best {
                        Some((bo, bk, _)) => objective < *bo || (objective == *bo && key < *bk),
                        None => true,
                    };
                    if better {
                        best = Some((objective, key, d));
                    }
                }
            }
        }
    }
    let (objective, _, division) = best.expect("at least the all-idle-free corner exists");
    Ok((division, objective))
}

//! The strategy ladder: six dispatch policies for one pipeline step on the
//! heterogeneous machine, evaluated under a deterministic analytical clock.
//!
//! Every strategy observes a per-step barrier: a step's kernels all finish
//! before the next step starts, and a step's makespan is the latest
//! completion inside it. Units engaged by a placement are busy for its whole
//! duration; energy charges active power on busy time and idle power on the
//! rest of the total in-flight time.
//!
//! The ladder, from naive to adaptive:
//! 1. `baseline` — everything serial on one fast core.
//! 2. `cpu-fifo` — strict kernel order; parallel kernels split evenly across
//!    all CPU cores.
//! 3. `cpu-gpu-fifo` — as 2, with the GPU as an extra equal share.
//! 4. `priority-placement` — priority-ordered greedy placement with rigid
//!    class policies (big kernels take the whole machine, small parallel
//!    kernels a whole CPU class, serial kernels one core).
//! 5. `optimal-split` — strict kernel order; each big kernel gets the
//!    cost-optimal division of the full machine.
//! 6. `adaptive-split` — priority-ordered greedy placement; each big kernel
//!    gets the cost-optimal division of whatever is free right now.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use autolabel_core::Real;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::kernel::{HardwareModel, KernelKind, KernelSpec, StepWorkload};
use crate::model::{
    division_time, optimal_division, optimal_threads, parallel_time, serial_time, Availability,
    Division,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Baseline,
    CpuFifo,
    CpuGpuFifo,
    PriorityPlacement,
    OptimalSplit,
    AdaptiveSplit,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Baseline,
        Strategy::CpuFifo,
        Strategy::CpuGpuFifo,
        Strategy::PriorityPlacement,
        Strategy::OptimalSplit,
        Strategy::AdaptiveSplit,
    ];

    /// Position on the ladder, 1 (most naive) through 6 (most adaptive).
    pub fn ladder_index(self) -> u8 {
        match self {
            Strategy::Baseline => 1,
            Strategy::CpuFifo => 2,
            Strategy::CpuGpuFifo => 3,
            Strategy::PriorityPlacement => 4,
            Strategy::OptimalSplit => 5,
            Strategy::AdaptiveSplit => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::CpuFifo => "cpu-fifo",
            Strategy::CpuGpuFifo => "cpu-gpu-fifo",
            Strategy::PriorityPlacement => "priority-placement",
            Strategy::OptimalSplit => "optimal-split",
            Strategy::AdaptiveSplit => "adaptive-split",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase();
        for strategy in Strategy::ALL {
            if normalized == strategy.name()
                || normalized == strategy.ladder_index().to_string()
                || normalized == format!("s{}", strategy.ladder_index())
            {
                return Ok(strategy);
            }
        }
        Err(SimError::config(format!(
            "unknown strategy {s:?}; use 1-6 or one of {}",
            Strategy::ALL.map(|x| x.name()).join(", ")
        )))
    }
}

/// One scheduled execution: a kernel running on a set of units.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement<F = f64> {
    pub step: usize,
    pub kernel: String,
    /// Absolute start time (step barriers included).
    pub start: F,
    pub duration: F,
    /// Unit indices engaged for the whole duration.
    pub units: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "F: Serialize"))]
pub struct UnitBusy<F = f64> {
    pub unit: String,
    pub busy: F,
}

/// Everything a simulation run reports.
#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "F: Serialize"))]
pub struct SimReport<F = f64> {
    pub strategy: Strategy,
    pub steps: usize,
    pub step_makespans: Vec<F>,
    pub total_time: F,
    pub per_unit_busy: Vec<UnitBusy<F>>,
    pub energy: F,
    /// Closed-form single-fast-core total for the same workload.
    pub serial_reference_time: F,
    pub speedup_vs_baseline: F,
    #[serde(skip)]
    pub trace: Vec<Placement<F>>,
}

/// Total energy: per unit, active power on busy time plus idle power on the
/// remaining in-flight time.
pub fn energy<F: Real>(hw: &HardwareModel<F>, busy: &[F], total_time: F) -> F {
    (0..hw.total_units())
        .map(|u| {
            let class = hw.unit_class(u);
            hw.powers.active(class) * busy[u] + hw.powers.idle(class) * (total_time - busy[u])
        })
        .sum()
}

/// Runs every step of the workload under one strategy.
pub fn simulate<F: Real>(
    workloads: &[StepWorkload<F>],
    hw: &HardwareModel<F>,
    strategy: Strategy,
) -> Result<SimReport<F>> {
    hw.validate()?;
    if workloads.is_empty() {
        return Err(SimError::config("simulate needs at least one step"));
    }
    if strategy == Strategy::Baseline && hw.n_fast == 0 {
        return Err(SimError::config("the baseline strategy needs a fast core"));
    }
    for w in workloads {
        if w.n_l <= F::zero() {
            return Err(SimError::config("per-step load must be positive"));
        }
        for k in &w.kernels {
            k.validate()?;
        }
    }

    let units = hw.total_units();
    let mut busy = vec![F::zero(); units];
    let mut trace: Vec<Placement<F>> = Vec::new();
    let mut makespans = Vec::with_capacity(workloads.len());
    let mut total = F::zero();
    let mut serial_reference = F::zero();

    for (step, w) in workloads.iter().enumerate() {
        for k in &w.kernels {
            serial_reference = serial_reference + serial_time(k, w.n_l);
        }
        let placements = match strategy {
            Strategy::Baseline | Strategy::CpuFifo | Strategy::CpuGpuFifo
            | Strategy::OptimalSplit => fifo_step(w, hw, strategy)?,
            Strategy::PriorityPlacement => greedy_step(w, hw, step, false)?,
            Strategy::AdaptiveSplit => greedy_step(w, hw, step, true)?,
        };
        let mut makespan = F::zero();
        for p in &placements {
            let end = p.start + p.duration;
            if end > makespan {
                makespan = end;
            }
            for &u in &p.units {
                busy[u] = busy[u] + p.duration;
            }
        }
        trace.extend(placements.into_iter().map(|mut p| {
            p.step = step;
            p.start = p.start + total;
            p
        }));
        makespans.push(makespan);
        total = total + makespan;
    }

    let energy_total = energy(hw, &busy, total);
    Ok(SimReport {
        strategy,
        steps: workloads.len(),
        step_makespans: makespans,
        total_time: total,
        per_unit_busy: (0..units)
            .map(|u| UnitBusy { unit: hw.unit_name(u), busy: busy[u] })
            .collect(),
        energy: energy_total,
        serial_reference_time: serial_reference,
        speedup_vs_baseline: serial_reference / total,
        trace,
    })
}

/// The kernel rescaled to a slow core: its slow serial time becomes the base.
fn on_slow<F: Real>(k: &KernelSpec<F>) -> KernelSpec<F> {
    KernelSpec { t_ser: k.t_ser_slow, ..k.clone() }
}

/// Unit indices for a division: lowest fast cores, lowest slow cores, and the
/// GPU whenever it carries weight.
fn division_units<F: Real>(d: &Division<F>, hw: &HardwareModel<F>) -> Vec<usize> {
    let mut units: Vec<usize> = (0..d.n_fast).collect();
    units.extend((0..d.n_slow).map(|i| hw.n_fast + i));
    if d.w_acc > F::zero() {
        units.push(hw.n_fast + hw.n_slow);
    }
    units
}

/// Even split across the unit classes present (GPU included on request):
/// each participating class takes an equal work share with all of its cores.
fn equal_division<F: Real>(hw: &HardwareModel<F>, with_gpu: bool) -> Division<F> {
    let fast = hw.n_fast > 0;
    let slow = hw.n_slow > 0;
    let gpu = with_gpu && hw.gpu;
    let classes = usize::from(fast) + usize::from(slow) + usize::from(gpu);
    let share = F::one() / F::from_count(classes);
    Division {
        n_fast: if fast { hw.n_fast } else { 0 },
        n_slow: if slow { hw.n_slow } else { 0 },
        w_fast: if fast { share } else { F::zero() },
        w_slow: if slow { share } else { F::zero() },
        w_acc: if gpu { share } else { F::zero() },
    }
}

/// Serial placement preferring a fast core, used by every strategy above the
/// baseline. Returns the unit and the duration.
fn serial_slot<F: Real>(k: &KernelSpec<F>, n_l: F, hw: &HardwareModel<F>) -> (usize, F) {
    if hw.n_fast > 0 {
        (0, serial_time(k, n_l))
    } else {
        (hw.n_fast, serial_time(&on_slow(k), n_l))
    }
}

/// Strict in-order dispatch: one kernel at a time, each taking the units its
/// policy names. Covers ladder strategies 1, 2, 3, and 5.
fn fifo_step<F: Real>(
    w: &StepWorkload<F>,
    hw: &HardwareModel<F>,
    strategy: Strategy,
) -> Result<Vec<Placement<F>>> {
    let mut t = F::zero();
    let mut placements = Vec::with_capacity(w.kernels.len());
    for k in &w.kernels {
        let (units, duration) = match (strategy, k.kind) {
            (Strategy::Baseline, _) => (vec![0], serial_time(k, w.n_l)),
            (_, KernelKind::Serial) => {
                let (unit, duration) = serial_slot(k, w.n_l, hw);
                (vec![unit], duration)
            }
            (Strategy::OptimalSplit, KernelKind::Parallel) if k.time_consuming => {
                let avail = Availability { fast: hw.n_fast, slow: hw.n_slow, gpu: hw.gpu };
                let (d, objective) = optimal_division(k, w.n_l, &avail)?;
                (division_units(&d, hw), objective)
            }
            (_, KernelKind::Parallel) => {
                let with_gpu = strategy != Strategy::CpuFifo;
                let d = equal_division(hw, with_gpu);
                let duration =
                    k.t_tm * F::from_count(d.threads()) + division_time(k, &d, w.n_l)?;
                (division_units(&d, hw), duration)
            }
        };
        placements.push(Placement {
            step: 0,
            kernel: k.name.clone(),
            start: t,
            duration,
            units,
        });
        t = t + duration;
    }
    Ok(placements)
}

/// Priority order of a step's kernels: interleaved rounds over the ensemble
/// member groups. Each round visits every member group once — starting at a
/// cursor that rotates by one group per step — and takes that group's
/// largest remaining kernel; kernels belonging to no member form a final
/// pseudo-group. Size ties fall back to the kernel name.
fn priority_order<F: Real>(kernels: &[KernelSpec<F>], n_l: F, step: usize) -> Vec<usize> {
    let groups: Vec<u32> = kernels.iter().filter_map(|k| k.hf_id).collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut queues: BTreeMap<Option<u32>, Vec<usize>> = BTreeMap::new();
    for (i, k) in kernels.iter().enumerate() {
        queues.entry(k.hf_id).or_default().push(i);
    }
    for queue in queues.values_mut() {
        queue.sort_by(|&a, &b| {
            serial_time(&kernels[b], n_l)
                .partial_cmp(&serial_time(&kernels[a], n_l))
                .expect("kernel times are finite")
                .then(kernels[a].name.cmp(&kernels[b].name))
        });
    }

    let mut visit: Vec<Option<u32>> = Vec::with_capacity(groups.len() + 1);
    if !groups.is_empty() {
        let cursor = step % groups.len();
        visit.extend((0..groups.len()).map(|o| Some(groups[(cursor + o) % groups.len()])));
    }
    visit.push(None);

    let mut order = Vec::with_capacity(kernels.len());
    loop {
        let mut advanced = false;
        for gid in &visit {
            if let Some(queue) = queues.get_mut(gid) {
                if !queue.is_empty() {
                    order.push(queue.remove(0));
                    advanced = true;
                }
            }
        }
        if !advanced {
            break;
        }
    }
    order
}

/// What a kernel asks of the currently free units. `None` means it cannot be
/// placed right now and waits.
#[allow(clippy::too_many_arguments)]
fn place_request<F: Real>(
    k: &KernelSpec<F>,
    n_l: F,
    hw: &HardwareModel<F>,
    free_fast: &[usize],
    free_slow: &[usize],
    gpu_free: bool,
    adaptive: bool,
) -> Result<Option<(Vec<usize>, F)>> {
    match k.kind {
        KernelKind::Serial => {
            if let Some(&u) = free_fast.first() {
                Ok(Some((vec![u], serial_time(k, n_l))))
            } else if let Some(&u) = free_slow.first() {
                Ok(Some((vec![u], serial_time(&on_slow(k), n_l))))
            } else {
                Ok(None)
            }
        }
        KernelKind::Parallel if k.time_consuming && adaptive => {
            // tailor a division to whatever is free right now
            if free_fast.is_empty() && free_slow.is_empty() && !gpu_free {
                return Ok(None);
            }
            let avail =
                Availability { fast: free_fast.len(), slow: free_slow.len(), gpu: gpu_free };
            let (d, objective) = optimal_division(k, n_l, &avail)?;
            let mut units: Vec<usize> = free_fast[..d.n_fast].to_vec();
            units.extend(&free_slow[..d.n_slow]);
            if d.w_acc > F::zero() {
                units.push(hw.n_fast + hw.n_slow);
            }
            Ok(Some((units, objective)))
        }
        KernelKind::Parallel if k.time_consuming => {
            // rigid policy: the whole machine at an even class split
            let all_free = free_fast.len() == hw.n_fast
                && free_slow.len() == hw.n_slow
                && (!hw.gpu || gpu_free);
            if !all_free {
                return Ok(None);
            }
            let d = equal_division(hw, true);
            let duration = k.t_tm * F::from_count(d.threads()) + division_time(k, &d, n_l)?;
            Ok(Some((division_units(&d, hw), duration)))
        }
        KernelKind::Parallel => {
            if adaptive {
                // best thread count on the free cores of the better class
                if !free_fast.is_empty() {
                    let (n, _) = optimal_threads(k, n_l, free_fast.len())?;
                    let duration = k.t_tm * F::from_count(n) + parallel_time(k, n_l, n)?;
                    Ok(Some((free_fast[..n].to_vec(), duration)))
                } else if !free_slow.is_empty() {
                    let scaled = on_slow(k);
                    let (n, _) = optimal_threads(&scaled, n_l, free_slow.len())?;
                    let duration =
                        scaled.t_tm * F::from_count(n) + parallel_time(&scaled, n_l, n)?;
                    Ok(Some((free_slow[..n].to_vec(), duration)))
                } else {
                    Ok(None)
                }
            } else if hw.n_fast > 0 && free_fast.len() == hw.n_fast {
                // whole fast class
                let duration = k.t_tm * F::from_count(hw.n_fast)
                    + parallel_time(k, n_l, hw.n_fast)?;
                Ok(Some((free_fast.to_vec(), duration)))
            } else if free_fast.is_empty() && hw.n_slow > 0 && free_slow.len() == hw.n_slow {
                // every fast core is taken: the whole slow class may serve
                let scaled = on_slow(k);
                let duration = scaled.t_tm * F::from_count(hw.n_slow)
                    + parallel_time(&scaled, n_l, hw.n_slow)?;
                Ok(Some((free_slow.to_vec(), duration)))
            } else {
                Ok(None)
            }
        }
    }
}

/// Greedy list scheduling in priority order: at every decision time, place
/// each pending kernel whose request the free units satisfy, then advance to
/// the next completion. Covers ladder strategies 4 and 6.
fn greedy_step<F: Real>(
    w: &StepWorkload<F>,
    hw: &HardwareModel<F>,
    step: usize,
    adaptive: bool,
) -> Result<Vec<Placement<F>>> {
    let mut pending = priority_order(&w.kernels, w.n_l, step);
    let units = hw.total_units();
    let mut free_at = vec![F::zero(); units];
    let mut placements = Vec::with_capacity(w.kernels.len());
    let mut t = F::zero();

    while !pending.is_empty() {
        // place until a full pass over the queue makes no progress
        loop {
            let mut placed_any = false;
            let mut i = 0;
            while i < pending.len() {
                let k = &w.kernels[pending[i]];
                let free_fast: Vec<usize> =
                    (0..hw.n_fast).filter(|&u| free_at[u] <= t).collect();
                let free_slow: Vec<usize> = (hw.n_fast..hw.n_fast + hw.n_slow)
                    .filter(|&u| free_at[u] <= t)
                    .collect();
                let gpu_free = hw.gpu && free_at[hw.n_fast + hw.n_slow] <= t;
                match place_request(k, w.n_l, hw, &free_fast, &free_slow, gpu_free, adaptive)? {
                    Some((engaged, duration)) => {
                        for &u in &engaged {
                            free_at[u] = t + duration;
                        }
                        placements.push(Placement {
                            step,
                            kernel: k.name.clone(),
                            start: t,
                            duration,
                            units: engaged,
                        });
                        pending.remove(i);
                        placed_any = true;
                    }
                    None => i += 1,
                }
            }
            if !placed_any {
                break;
            }
        }
        if pending.is_empty() {
            break;
        }
        let next = free_at
            .iter()
            .copied()
            .filter(|&f| f > t)
            .fold(None, |acc: Option<F>, f| match acc {
                Some(a) if a <= f => Some(a),
                _ => Some(f),
            });
        match next {
            Some(next_t) => t = next_t,
            None => {
                return Err(SimError::contract(
                    "scheduler stalled with pending kernels and an idle machine",
                ))
            }
        }
    }
    Ok(placements)
}

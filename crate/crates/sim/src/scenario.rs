//! Declarative scenario files: hardware plus a per-step kernel table in
//! TOML, expanded into runnable step workloads.
//!
//! The built-in default models one pipeline step of the stream labeler on a
//! big.LITTLE-style phone SoC: four per-member kernel families dominating
//! the step, one serial warmup, and a handful of small parallel helpers.
//! Serial times are fractions of one step at unit load, so a whole serial
//! step costs exactly 1.0 time units at `n_l = 1`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::kernel::{HardwareModel, KernelKind, KernelSpec, StepWorkload, UnitPowers};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub hardware: HardwareSection,
    /// Ensemble size; per-member kernels expand into this many instances.
    pub hf_count: usize,
    pub steps: usize,
    pub n_l: NlSpec,
    pub kernels: Vec<KernelSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSection {
    pub n_fast: usize,
    pub n_slow: usize,
    pub gpu: bool,
    #[serde(default)]
    pub powers: PowersSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowersSection {
    pub active_fast: f64,
    pub active_slow: f64,
    pub active_gpu: f64,
    pub idle_fast: f64,
    pub idle_slow: f64,
    pub idle_gpu: f64,
}

impl Default for PowersSection {
    fn default() -> Self {
        let p: UnitPowers = UnitPowers::default();
        PowersSection {
            active_fast: p.active_fast,
            active_slow: p.active_slow,
            active_gpu: p.active_gpu,
            idle_fast: p.idle_fast,
            idle_slow: p.idle_slow,
            idle_gpu: p.idle_gpu,
        }
    }
}

/// Per-step ensemble load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NlSpec {
    Constant { value: f64 },
    /// Linear ramp from `start` at the first step to `end` at the last.
    Linear { start: f64, end: f64 },
    /// One value per step.
    Explicit { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub name: String,
    pub kind: KernelKind,
    #[serde(default)]
    pub time_consuming: bool,
    /// Expand into one kernel instance per ensemble member.
    #[serde(default)]
    pub per_hf: bool,
    pub t_ser: f64,
    pub t_ser_slow: f64,
    #[serde(default)]
    pub t_exe_acc: f64,
    #[serde(default)]
    pub t_datacpy_acc: f64,
    pub t_tm: f64,
    pub p: f64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)
            .map_err(|e| SimError::scenario(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| SimError::scenario(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| SimError::scenario(format!("cannot serialize scenario: {e}")))?;
        fs::write(path, text)
            .map_err(|e| SimError::scenario(format!("cannot write {}: {e}", path.display())))
    }

    /// Expands the scenario into per-step workloads and the hardware model.
    pub fn build(&self) -> Result<(Vec<StepWorkload>, HardwareModel)> {
        if self.steps == 0 {
            return Err(SimError::scenario("a scenario needs at least one step"));
        }
        let hw = HardwareModel {
            n_fast: self.hardware.n_fast,
            n_slow: self.hardware.n_slow,
            gpu: self.hardware.gpu,
            powers: UnitPowers {
                active_fast: self.hardware.powers.active_fast,
                active_slow: self.hardware.powers.active_slow,
                active_gpu: self.hardware.powers.active_gpu,
                idle_fast: self.hardware.powers.idle_fast,
                idle_slow: self.hardware.powers.idle_slow,
                idle_gpu: self.hardware.powers.idle_gpu,
            },
        };
        hw.validate()?;

        let mut template: Vec<KernelSpec> = Vec::new();
        for section in &self.kernels {
            let expansion = if section.per_hf {
                if self.hf_count == 0 {
                    return Err(SimError::scenario(format!(
                        "kernel {} is per-member but hf_count is 0",
                        section.name
                    )));
                }
                (0..self.hf_count as u32).map(Some).collect()
            } else {
                vec![None]
            };
            for hf_id in expansion {
                let spec = KernelSpec {
                    name: match hf_id {
                        Some(g) => format!("{}/{g}", section.name),
                        None => section.name.clone(),
                    },
                    kind: section.kind,
                    time_consuming: section.time_consuming,
                    hf_id,
                    t_ser: section.t_ser,
                    t_ser_slow: section.t_ser_slow,
                    t_exe_acc: section.t_exe_acc,
                    t_datacpy_acc: section.t_datacpy_acc,
                    t_tm: section.t_tm,
                    p: section.p,
                };
                spec.validate()?;
                template.push(spec);
            }
        }
        if template.is_empty() {
            return Err(SimError::scenario("a scenario needs at least one kernel"));
        }

        let loads = self.loads()?;
        let workloads = loads
            .into_iter()
            .map(|n_l| StepWorkload { kernels: template.clone(), n_l })
            .collect();
        Ok((workloads, hw))
    }

    fn loads(&self) -> Result<Vec<f64>> {
        let loads: Vec<f64> = match &self.n_l {
            NlSpec::Constant { value } => vec![*value; self.steps],
            NlSpec::Linear { start, end } => (0..self.steps)
                .map(|i| {
                    if self.steps == 1 {
                        *start
                    } else {
                        start + (end - start) * i as f64 / (self.steps - 1) as f64
                    }
                })
                .collect(),
            NlSpec::Explicit { values } => {
                if values.len() != self.steps {
                    return Err(SimError::scenario(format!(
                        "explicit load list has {} entries for {} steps",
                        values.len(),
                        self.steps
                    )));
                }
                values.clone()
            }
        };
        if loads.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(SimError::scenario("per-step loads must be positive and finite"));
        }
        Ok(loads)
    }
}

/// The built-in workload: one stream-labeling step on a 4 fast + 4 slow + GPU
/// SoC, with the load ramping linearly from 1 to 10 active members.
///
/// Serial-time budget of one step (fractions of 1.0): four per-member
/// parallel families — sample absorption 38%, drift detection 18%, ensemble
/// voting 17.9%, instance labeling 17.7% — plus a 6.4% serial warmup and four
/// 0.5% parallel helpers. Slow cores run CPU work at half speed; the
/// accelerator executes a parallel part in 20% of fast-serial time plus 2%
/// copy overhead.
pub fn default_scenario(steps: usize) -> Scenario {
    let hf_count = 6;
    let per_member = |name: &str, share: f64| KernelSection {
        name: name.to_string(),
        kind: KernelKind::Parallel,
        time_consuming: true,
        per_hf: true,
        t_ser: share / hf_count as f64,
        t_ser_slow: 2.0 * share / hf_count as f64,
        t_exe_acc: 0.2 * share / hf_count as f64,
        t_datacpy_acc: 0.02 * share / hf_count as f64,
        t_tm: 0.0005,
        p: 0.9,
    };
    let helper = |name: &str| KernelSection {
        name: name.to_string(),
        kind: KernelKind::Parallel,
        time_consuming: false,
        per_hf: false,
        t_ser: 0.005,
        t_ser_slow: 0.010,
        t_exe_acc: 0.001,
        t_datacpy_acc: 0.0001,
        t_tm: 0.0005,
        p: 0.9,
    };
    Scenario {
        hardware: HardwareSection {
            n_fast: 4,
            n_slow: 4,
            gpu: true,
            powers: PowersSection::default(),
        },
        hf_count,
        steps,
        n_l: NlSpec::Linear { start: 1.0, end: 10.0 },
        kernels: vec![
            per_member("absorb_samples", 0.380),
            per_member("drift_detect", 0.180),
            per_member("ensemble_vote", 0.179),
            per_member("label_assign", 0.177),
            KernelSection {
                name: "warmup".to_string(),
                kind: KernelKind::Serial,
                time_consuming: false,
                per_hf: false,
                t_ser: 0.064,
                t_ser_slow: 0.128,
                t_exe_acc: 0.0,
                t_datacpy_acc: 0.0,
                t_tm: 0.0005,
                p: 0.0,
            },
            helper("vote_normalize"),
            helper("buffer_upkeep"),
            helper("cap_enforce"),
            helper("log_flush"),
        ],
    }
}

//! Run configuration: a TOML file of engine parameters with CLI overrides.

use std::path::Path;

use autolabel_core::{AdaptationConfig, EnsembleConfig, StreamConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Every tunable of a labeling run, in one flat serializable struct.
///
/// Field-by-field this mirrors [`EnsembleConfig`] and [`AdaptationConfig`];
/// `chunk_size` belongs to the pipeline (how the stream is sliced), and
/// `max_prototypes` defaults to twice the initial ensemble size when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Ensemble members.
    pub num_hf: usize,
    /// Prototypes per member at seed time.
    pub k_per_hf: usize,
    /// Stream instances per chunk.
    pub chunk_size: usize,
    /// Assignment threshold on the aggregate score.
    pub tau: f64,
    /// Impurity penalty weight for prototype construction.
    pub lambda: f64,
    /// Clustering iteration cap.
    pub max_iters: usize,
    /// Coverage slack on prototype radii.
    pub slack: f64,
    /// Bootstrap-resample the seed set per member.
    pub bootstrap: bool,
    /// Master RNG seed.
    pub seed: u64,
    /// Neighborhood size for cohesion scoring.
    pub q: usize,
    /// Minimum cohort size to found a label.
    pub min_cohort: usize,
    /// Buffer scan cadence, in chunks.
    pub check_period: usize,
    /// Prototype budget across the ensemble (default: 2x initial size).
    pub max_prototypes: Option<usize>,
    /// Prototypes built for a freshly founded label.
    pub new_label_k: usize,
    /// Buffer residency limit, in chunks.
    pub ttl_chunks: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ensemble = EnsembleConfig::<f64>::default();
        let adaptation = AdaptationConfig::default();
        RunConfig {
            num_hf: ensemble.num_hf,
            k_per_hf: ensemble.k_per_hf,
            chunk_size: 20,
            tau: ensemble.tau,
            lambda: ensemble.lambda,
            max_iters: ensemble.max_iters,
            slack: ensemble.slack,
            bootstrap: ensemble.bootstrap,
            seed: ensemble.seed,
            q: adaptation.q,
            min_cohort: adaptation.min_cohort,
            check_period: adaptation.check_period,
            max_prototypes: None,
            new_label_k: adaptation.new_label_k,
            ttl_chunks: adaptation.ttl_chunks,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::config(format!("cannot serialize config: {e}")))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    /// The engine-side view of this configuration.
    pub fn stream_config(&self) -> StreamConfig {
        let ensemble = EnsembleConfig {
            num_hf: self.num_hf,
            k_per_hf: self.k_per_hf,
            tau: self.tau,
            lambda: self.lambda,
            slack: self.slack,
            max_iters: self.max_iters,
            bootstrap: self.bootstrap,
            seed: self.seed,
        };
        let mut adaptation = AdaptationConfig::for_ensemble(&ensemble);
        adaptation.q = self.q;
        adaptation.min_cohort = self.min_cohort;
        adaptation.check_period = self.check_period;
        adaptation.new_label_k = self.new_label_k;
        adaptation.ttl_chunks = self.ttl_chunks;
        if let Some(cap) = self.max_prototypes {
            adaptation.max_prototypes = cap;
        }
        StreamConfig { ensemble, adaptation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 {
            return Err(CliError::config("chunk_size must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(CliError::config("tau must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.num_hf, 6);
        assert_eq!(cfg.k_per_hf, 40);
        assert_eq!(cfg.chunk_size, 20);
        assert_eq!(cfg.tau, 0.7);
    }

    #[test]
    fn partial_toml_fills_in_defaults() {
        let cfg: RunConfig = toml::from_str("tau = 0.5\nchunk_size = 10\n").unwrap();
        assert_eq!(cfg.tau, 0.5);
        assert_eq!(cfg.chunk_size, 10);
        assert_eq!(cfg.num_hf, RunConfig::default().num_hf);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("theta = 1.0\n").is_err());
    }

    #[test]
    fn stream_config_derives_the_prototype_cap() {
        let cfg = RunConfig::default();
        let sc = cfg.stream_config();
        assert_eq!(sc.adaptation.max_prototypes, 6 * 40 * 2);
        let capped = RunConfig { max_prototypes: Some(100), ..RunConfig::default() };
        assert_eq!(capped.stream_config().adaptation.max_prototypes, 100);
    }

    #[test]
    fn validation_rejects_silly_values() {
        assert!(RunConfig { chunk_size: 0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { tau: 1.5, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}

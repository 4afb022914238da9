//! Heuristic-function ensembles: generation, per-member voting, and
//! confidence-weighted aggregation.
//!
//! Each ensemble member labels an instance with its nearest prototype's
//! majority label at confidence
//!
//! ```text
//! raw_conf = (radius - distance) * f_max / sum(frequencies)
//! ```
//!
//! which is negative outside the radius. Raw confidences are normalized
//! across the ensemble (clamp below zero, divide by the maximum), and the
//! per-label score is the normalized-confidence mass voting for that label
//! divided by the total normalized mass. Scores at or above the decision
//! threshold assign the label; everything else defers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::{impurity_kmeans, ClusteringConfig};
use crate::error::{EngineError, Result};
use crate::geometry::{covers, nearest_prototype};
use crate::scalar::Real;
use crate::types::{HeuristicFunction, Instance, LabelDecision, LabelId, Outcome, Vote};

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig<F = f64> {
    /// Number of ensemble members.
    pub num_hf: usize,
    /// Prototypes per member (K of the per-member clustering).
    pub k_per_hf: usize,
    /// Decision threshold on the aggregate score.
    pub tau: F,
    /// Impurity weight handed to the clustering.
    pub lambda: F,
    /// Coverage slack: prototypes cover up to `radius * (1 + slack)`.
    pub slack: F,
    /// Iteration cap handed to the clustering.
    pub max_iters: usize,
    /// Bootstrap-resample the labeled set per member. Disabling makes every
    /// member cluster the identical input (useful for tests).
    pub bootstrap: bool,
    /// Master seed; per-member seeds derive from it.
    pub seed: u64,
}

impl<F: Real> Default for EnsembleConfig<F> {
    fn default() -> Self {
        EnsembleConfig {
            num_hf: 6,
            k_per_hf: 40,
            tau: F::from_f(0.7),
            lambda: F::one(),
            slack: F::from_f(0.10),
            max_iters: 100,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Builds the ensemble from the labeled seed set: each member clusters a
/// bootstrap resample of `labeled` with impurity-penalized K-means.
pub fn generate_heuristics<F: Real>(
    labeled: &[(Vec<F>, LabelId)],
    cfg: &EnsembleConfig<F>,
) -> Result<Vec<HeuristicFunction<F>>> {
    if cfg.num_hf == 0 {
        return Err(EngineError::config("ensemble needs at least one member"));
    }
    if labeled.len() < cfg.k_per_hf {
        return Err(EngineError::config(format!(
            "k_per_hf={} exceeds the {} labeled seed rows",
            cfg.k_per_hf,
            labeled.len()
        )));
    }
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ensemble = Vec::with_capacity(cfg.num_hf);
    for hf_id in 0..cfg.num_hf {
        let hf_seed = master.gen::<u64>();
        let mut resample_rng = ChaCha8Rng::seed_from_u64(hf_seed);
        let sample: Vec<(Vec<F>, Option<LabelId>)> = if cfg.bootstrap {
            (0..labeled.len())
                .map(|_| {
                    let (f, l) = &labeled[resample_rng.gen_range(0..labeled.len())];
                    (f.clone(), Some(*l))
                })
                .collect()
        } else {
            labeled.iter().map(|(f, l)| (f.clone(), Some(*l))).collect()
        };
        let ccfg = ClusteringConfig {
            k: cfg.k_per_hf,
            lambda: cfg.lambda,
            max_iters: cfg.max_iters,
            seed: hf_seed,
        };
        let prototypes = impurity_kmeans(&sample, &ccfg)?;
        ensemble.push(HeuristicFunction { id: hf_id as u32, prototypes, rng_seed: hf_seed });
    }
    Ok(ensemble)
}

/// One member's vote: majority label of the nearest prototype plus raw
/// confidence. `None` when that prototype has an empty label histogram.
pub fn hf_label<F: Real>(h: &HeuristicFunction<F>, x: &[F]) -> Result<Option<(LabelId, F)>> {
    let (idx, d) = nearest_prototype(h, x)?;
    let p = &h.prototypes[idx];
    let Some((label, _)) = p.majority_label() else {
        return Ok(None);
    };
    let purity = p.purity().expect("majority implies non-empty histogram");
    Ok(Some((label, (p.radius - d) * purity)))
}

/// Clamp-below-zero, then divide by the maximum. An all-non-positive input
/// normalizes to all zeros.
pub fn normalize_confidences<F: Real>(raw: &[F]) -> Vec<F> {
    let clamped: Vec<F> = raw.iter().map(|&c| if c > F::zero() { c } else { F::zero() }).collect();
    let max = clamped.iter().fold(F::zero(), |a, &b| if b > a { b } else { a });
    if max == F::zero() {
        return clamped;
    }
    clamped.into_iter().map(|c| c / max).collect()
}

/// Scores already-normalized votes: per label, the fraction of the total
/// normalized confidence mass voting for it. Returns the best label (ties
/// toward the smallest id) and its score; `(None, 0)` when no mass exists.
pub fn score_votes<F: Real>(votes: &[(LabelId, F)]) -> (Option<LabelId>, F) {
    let total: F = votes.iter().map(|&(_, c)| c).sum();
    if total <= F::zero() {
        return (None, F::zero());
    }
    let mut labels: Vec<LabelId> = votes.iter().map(|&(l, _)| l).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut best: Option<(LabelId, F)> = None;
    for label in labels {
        let mass: F = votes.iter().filter(|&&(l, _)| l == label).map(|&(_, c)| c).sum();
        let score = mass / total;
        match best {
            Some((_, bs)) if score <= bs => {}
            _ => best = Some((label, score)),
        }
    }
    let (label, score) = best.expect("positive total implies at least one label");
    (Some(label), score)
}

/// Everything the ensemble knows about one instance before thresholding.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResult<F = f64> {
    /// Highest-scoring label; `None` when no member supplied positive
    /// confidence (or the instance is uncovered).
    pub best_label: Option<LabelId>,
    pub score: F,
    /// Whether any prototype of any member covers the instance.
    pub covered: bool,
    pub votes: Vec<Vote<F>>,
}

impl<F: Real> AggregateResult<F> {
    /// Applies the decision threshold and stamps bookkeeping fields.
    pub fn into_decision(self, instance_id: u64, chunk: usize, tau: F) -> LabelDecision<F> {
        let outcome = match self.best_label {
            Some(label) if self.score >= tau => Outcome::Assigned { label, score: self.score },
            _ => Outcome::Deferred,
        };
        LabelDecision { instance_id, chunk, outcome, votes: self.votes, retroactive: false }
    }
}

/// Collects every member's vote for `x` and aggregates them.
///
/// An instance outside the slack-inflated cover of every prototype of every
/// member is immediately uncovered (it will defer); votes are not computed
/// for it.
pub fn aggregate_result<F: Real>(
    x: &Instance<F>,
    ensemble: &[HeuristicFunction<F>],
    cfg: &EnsembleConfig<F>,
) -> Result<AggregateResult<F>> {
    if ensemble.is_empty() {
        return Err(EngineError::config("aggregate needs a non-empty ensemble"));
    }
    let mut covered = false;
    'outer: for h in ensemble {
        for p in &h.prototypes {
            if covers(p, &x.features, cfg.slack)? {
                covered = true;
                break 'outer;
            }
        }
    }
    if !covered {
        return Ok(AggregateResult {
            best_label: None,
            score: F::zero(),
            covered: false,
            votes: Vec::new(),
        });
    }

    let mut raw: Vec<(u32, LabelId, F)> = Vec::with_capacity(ensemble.len());
    for h in ensemble {
        if h.prototypes.is_empty() {
            continue;
        }
        if let Some((label, conf)) = hf_label(h, &x.features)? {
            raw.push((h.id, label, conf));
        }
    }
    let norm = normalize_confidences(&raw.iter().map(|&(_, _, c)| c).collect::<Vec<_>>());
    let votes: Vec<Vote<F>> = raw
        .iter()
        .zip(&norm)
        .map(|(&(hf_id, label, raw_conf), &norm_conf)| Vote { hf_id, label, raw_conf, norm_conf })
        .collect();
    let (best_label, score) =
        score_votes(&votes.iter().map(|v| (v.label, v.norm_conf)).collect::<Vec<_>>());
    Ok(AggregateResult { best_label, score, covered: true, votes })
}

/// Full per-instance decision at chunk 0; the streaming engine stamps real
/// chunk indices via [`AggregateResult::into_decision`].
pub fn aggregate<F: Real>(
    x: &Instance<F>,
    ensemble: &[HeuristicFunction<F>],
    cfg: &EnsembleConfig<F>,
) -> Result<LabelDecision<F>> {
    Ok(aggregate_result(x, ensemble, cfg)?.into_decision(x.id, 0, cfg.tau))
}

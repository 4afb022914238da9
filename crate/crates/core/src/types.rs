//! Domain types: instances, labels, prototypes, heuristic functions, decisions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::scalar::Real;

/// Dense non-negative label identifier.
///
/// Ties anywhere in the engine break toward the smallest id, so `Ord` on this
/// type is load-bearing.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LabelId(pub u32);

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One streamed data point.
///
/// `true_label` is carried for evaluation only; no engine code path reads it.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<F = f64> {
    pub id: u64,
    pub features: Vec<F>,
    pub true_label: Option<LabelId>,
    /// Position in the stream.
    pub arrival_index: usize,
}

impl<F> Instance<F> {
    pub fn new(id: u64, features: Vec<F>, true_label: Option<LabelId>, arrival_index: usize) -> Self {
        Instance { id, features, true_label, arrival_index }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// A label discovered at runtime, with the chunk index that founded it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscoveredLabel {
    pub id: LabelId,
    pub founding_chunk: usize,
}

/// The evolving label space: seed labels plus labels founded from the stream.
///
/// Seed and discovered sets stay disjoint, discovered ids are allocated in
/// strictly increasing order, and nothing is ever removed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelSpace {
    seed: BTreeSet<LabelId>,
    discovered: Vec<DiscoveredLabel>,
}

impl LabelSpace {
    pub fn from_seed(labels: impl IntoIterator<Item = LabelId>) -> Self {
        LabelSpace { seed: labels.into_iter().collect(), discovered: Vec::new() }
    }

    pub fn seed_labels(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.seed.iter().copied()
    }

    pub fn discovered(&self) -> &[DiscoveredLabel] {
        &self.discovered
    }

    pub fn contains(&self, label: LabelId) -> bool {
        self.seed.contains(&label) || self.discovered.iter().any(|d| d.id == label)
    }

    pub fn is_discovered(&self, label: LabelId) -> bool {
        self.discovered.iter().any(|d| d.id == label)
    }

    /// Total number of labels currently known.
    pub fn len(&self) -> usize {
        self.seed.len() + self.discovered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The id the next founded label will get: one past the largest known id.
    pub fn next_id(&self) -> LabelId {
        let max_seed = self.seed.iter().next_back().map(|l| l.0);
        let max_disc = self.discovered.last().map(|d| d.id.0);
        match max_seed.into_iter().chain(max_disc).max() {
            Some(m) => LabelId(m + 1),
            None => LabelId(0),
        }
    }

    /// Allocates the next label id as a discovered label.
    pub fn allocate(&mut self, founding_chunk: usize) -> LabelId {
        let id = self.next_id();
        self.discovered.push(DiscoveredLabel { id, founding_chunk });
        id
    }
}

/// Labeled hypersphere summarizing a region of feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct Prototype<F = f64> {
    /// Cluster center.
    pub centroid: Vec<F>,
    /// Maximum distance from the centroid to any member seen so far.
    pub radius: F,
    /// Mean distance from the centroid to the members.
    pub mean_distance: F,
    /// Number of members absorbed.
    pub support: usize,
    /// Label histogram of the labeled members (unlabeled members count only
    /// toward `support`).
    pub frequencies: BTreeMap<LabelId, usize>,
}

impl<F: Real> Prototype<F> {
    pub fn dim(&self) -> usize {
        self.centroid.len()
    }

    /// Most frequent label and its count; ties break toward the smallest id.
    /// `None` when no labeled member has been absorbed.
    pub fn majority_label(&self) -> Option<(LabelId, usize)> {
        let mut best: Option<(LabelId, usize)> = None;
        for (&label, &count) in &self.frequencies {
            match best {
                Some((_, c)) if count <= c => {}
                _ => best = Some((label, count)),
            }
        }
        best
    }

    /// Total labeled-member count.
    pub fn total_frequency(&self) -> usize {
        self.frequencies.values().sum()
    }

    /// Majority share `f_max / sum(frequencies)`; `None` for an empty histogram.
    pub fn purity(&self) -> Option<F> {
        let total = self.total_frequency();
        let (_, fmax) = self.majority_label()?;
        Some(F::from_count(fmax) / F::from_count(total))
    }

    /// Records one confirmed label observation.
    pub fn record_label(&mut self, label: LabelId) {
        *self.frequencies.entry(label).or_insert(0) += 1;
    }

    /// True when this prototype's histogram mentions `label`.
    pub fn carries(&self, label: LabelId) -> bool {
        self.frequencies.get(&label).copied().unwrap_or(0) > 0
    }
}

/// One member of the ensemble: an ordered set of prototypes.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicFunction<F = f64> {
    /// Stable id, also used for scheduler affinity in the runtime simulator.
    pub id: u32,
    pub prototypes: Vec<Prototype<F>>,
    /// Seed that produced this member's bootstrap resample and clustering.
    pub rng_seed: u64,
}

impl<F> HeuristicFunction<F> {
    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }
}

/// Fixed-size slice of the stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Chunk<F = f64> {
    pub index: usize,
    pub instances: Vec<Instance<F>>,
}

/// Final verdict for one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome<F = f64> {
    Assigned { label: LabelId, score: F },
    Deferred,
}

impl<F: Copy> Outcome<F> {
    pub fn is_assigned(&self) -> bool {
        matches!(self, Outcome::Assigned { .. })
    }

    pub fn label(&self) -> Option<LabelId> {
        match self {
            Outcome::Assigned { label, .. } => Some(*label),
            Outcome::Deferred => None,
        }
    }

    pub fn score(&self) -> Option<F> {
        match self {
            Outcome::Assigned { score, .. } => Some(*score),
            Outcome::Deferred => None,
        }
    }
}

/// One ensemble member's vote for one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vote<F = f64> {
    pub hf_id: u32,
    pub label: LabelId,
    pub raw_conf: F,
    pub norm_conf: F,
}

/// The engine's decision for one instance.
///
/// An `Assigned` outcome always has score >= the decision threshold; a
/// `Deferred` instance was placed in the novelty buffer. `retroactive` marks
/// decisions emitted at founding time for instances that were buffered when
/// their label did not exist yet.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDecision<F = f64> {
    pub instance_id: u64,
    /// Chunk index the decision was emitted at.
    pub chunk: usize,
    pub outcome: Outcome<F>,
    pub votes: Vec<Vote<F>>,
    pub retroactive: bool,
}

//! Stream-labeling evaluation: tallies engine decisions against ground truth
//! and derives the standard novelty-detection percentages.
//!
//! Truth is reduced to a binary question per instance — does its true label
//! belong to the seed label set (existing) or not (new)? An assignment to any
//! discovered label counts as "labeled new"; no per-class correspondence
//! between discovered ids and true novel classes is attempted.

use std::collections::BTreeMap;

use crate::error::{EngineError, Result};
use crate::scalar::Real;
use crate::types::{LabelDecision, LabelId, LabelSpace, Outcome};

/// Counts over the finally-assigned, truth-bearing instances.
///
/// `labeled` is the evaluation population N: instances whose last decision is
/// an assignment and whose true label is known. Instances deferred forever
/// are excluded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalTally {
    /// N: assigned instances with ground truth.
    pub labeled: usize,
    /// Novel-class instances assigned to a discovered label.
    pub correct_new: usize,
    /// Known-class instances assigned their own label.
    pub correct_existing: usize,
    /// Known-class instances assigned to a discovered label.
    pub false_positives: usize,
    /// Novel-class instances assigned to a seed label.
    pub false_negatives: usize,
    /// N_l: instances assigned to any discovered label.
    pub assigned_new: usize,
}

impl EvalTally {
    /// Novel-class instances correctly flagged as new (alias used by the
    /// F-measure formulas).
    pub fn true_positives(&self) -> usize {
        self.correct_new
    }

    /// Overall accuracy in percent: both correct buckets over N.
    pub fn accuracy(&self) -> Result<f64> {
        if self.labeled == 0 {
            return Err(EngineError::UndefinedMetric("accuracy over zero labeled instances"));
        }
        Ok(100.0 * (self.correct_new + self.correct_existing) as f64 / self.labeled as f64)
    }

    /// Missed-new rate in percent: novel instances labeled existing, over the
    /// instances labeled new. The denominator is N_l, not the novel
    /// population, so values above 100 are possible; report accordingly.
    pub fn m_new(&self) -> Result<f64> {
        if self.assigned_new == 0 {
            return Err(EngineError::UndefinedMetric("m_new with nothing assigned new"));
        }
        Ok(100.0 * self.false_negatives as f64 / self.assigned_new as f64)
    }

    /// False-new rate in percent: existing instances labeled new, over the
    /// instances labeled existing.
    pub fn f_new(&self) -> Result<f64> {
        if self.labeled == self.assigned_new {
            return Err(EngineError::UndefinedMetric("f_new with nothing assigned existing"));
        }
        Ok(100.0 * self.false_positives as f64 / (self.labeled - self.assigned_new) as f64)
    }

    /// F-measure over new-class detection with recall weighted `beta` times
    /// precision:
    ///
    /// ```text
    /// (1 + beta^2) TP / ((1 + beta^2) TP + beta^2 FN + FP)
    /// ```
    pub fn f_beta(&self, beta: f64) -> Result<f64> {
        let b2 = beta * beta;
        let denom =
            (1.0 + b2) * self.true_positives() as f64 + b2 * self.false_negatives as f64
                + self.false_positives as f64;
        if denom == 0.0 {
            return Err(EngineError::UndefinedMetric("f_beta with an empty confusion"));
        }
        Ok((1.0 + b2) * self.true_positives() as f64 / denom)
    }
}

/// Folds a decision log into a tally.
///
/// The last record per instance wins, so a retroactive founding assignment
/// overrides the earlier deferral it corrects. Instances missing from `truth`
/// are ignored.
pub fn build_tally<F: Real>(
    decisions: &[LabelDecision<F>],
    truth: &BTreeMap<u64, LabelId>,
    space: &LabelSpace,
) -> EvalTally {
    let mut last: BTreeMap<u64, Outcome<F>> = BTreeMap::new();
    for d in decisions {
        last.insert(d.instance_id, d.outcome);
    }
    let seed: Vec<LabelId> = space.seed_labels().collect();
    let mut tally = EvalTally::default();
    for (id, outcome) in last {
        let Outcome::Assigned { label, .. } = outcome else { continue };
        let Some(&true_label) = truth.get(&id) else { continue };
        tally.labeled += 1;
        let truth_is_existing = seed.contains(&true_label);
        let assigned_new = space.is_discovered(label);
        if assigned_new {
            tally.assigned_new += 1;
        }
        match (truth_is_existing, assigned_new) {
            (false, true) => tally.correct_new += 1,
            (true, false) if label == true_label => tally.correct_existing += 1,
            (true, true) => tally.false_positives += 1,
            (false, false) => tally.false_negatives += 1,
            _ => {} // known class, wrong known label: counted in N only
        }
    }
    tally
}

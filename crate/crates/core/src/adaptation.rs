//! Self-adaptation over the stream: per-instance prototype drift updates,
//! a TTL-bounded novelty buffer for deferred instances, cohort detection via
//! the q-neighborhood separation score, founding of new labels, and a global
//! prototype cap.
//!
//! Chunk lifecycle (in order):
//! 1. per instance: each ensemble member absorbs the instance into its
//!    nearest prototype when that prototype covers it (geometry only), the
//!    updated ensemble votes, and a deferred instance enters the buffer;
//! 2. assigned instances credit their label to every prototype that
//!    absorbed them;
//! 3. expired buffer entries are dropped;
//! 4. on check chunks, one buffer scan may found one new label;
//! 5. the prototype cap is enforced.

use std::collections::{BTreeMap, BTreeSet};

use crate::clustering::{impurity_kmeans, ClusterPoint, ClusteringConfig};
use crate::ensemble::{aggregate_result, generate_heuristics, EnsembleConfig};
use crate::error::{EngineError, Result};
use crate::geometry::{covers, distance, nearest_prototype};
use crate::scalar::Real;
use crate::types::{
    Chunk, HeuristicFunction, Instance, LabelDecision, LabelId, LabelSpace, Outcome, Prototype,
};

/// Knobs of the novelty-detection side of the engine. All counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdaptationConfig {
    /// Neighborhood size for separation scores and the mutual-neighbor graph.
    pub q: usize,
    /// Minimum cohort size that may found a new label.
    pub min_cohort: usize,
    /// Buffer scans run every `check_period` chunks.
    pub check_period: usize,
    /// Global cap on the prototype count across the whole ensemble.
    pub max_prototypes: usize,
    /// Prototypes clustered out of a founding cohort (capped by cohort size).
    pub new_label_k: usize,
    /// Buffer entries older than this many chunks are dropped.
    pub ttl_chunks: usize,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        AdaptationConfig {
            q: 5,
            min_cohort: 5,
            check_period: 1,
            max_prototypes: 480,
            new_label_k: 3,
            ttl_chunks: 50,
        }
    }
}

impl AdaptationConfig {
    /// Defaults with the prototype cap sized to twice the ensemble's initial
    /// prototype count.
    pub fn for_ensemble<F: Real>(ensemble: &EnsembleConfig<F>) -> Self {
        AdaptationConfig {
            max_prototypes: ensemble.num_hf * ensemble.k_per_hf * 2,
            ..AdaptationConfig::default()
        }
    }
}

/// Full engine configuration: ensemble generation/voting plus adaptation.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamConfig<F = f64> {
    pub ensemble: EnsembleConfig<F>,
    pub adaptation: AdaptationConfig,
}

impl<F: Real> Default for StreamConfig<F> {
    fn default() -> Self {
        let ensemble = EnsembleConfig::default();
        let adaptation = AdaptationConfig::for_ensemble(&ensemble);
        StreamConfig { ensemble, adaptation }
    }
}

/// Deferred instances waiting for enough evidence to found a label.
/// Entries keep insertion order; each remembers the chunk it arrived in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoveltyBuffer<F = f64> {
    entries: Vec<(Instance<F>, usize)>,
    ttl_chunks: usize,
}

impl<F: Real> NoveltyBuffer<F> {
    pub fn new(ttl_chunks: usize) -> Self {
        NoveltyBuffer { entries: Vec::new(), ttl_chunks }
    }

    pub fn push(&mut self, instance: Instance<F>, chunk: usize) {
        self.entries.push((instance, chunk));
    }

    /// Keeps entries whose age (current chunk minus insertion chunk) is
    /// still below the TTL.
    pub fn evict_expired(&mut self, current_chunk: usize) {
        let ttl = self.ttl_chunks;
        self.entries.retain(|&(_, inserted)| current_chunk.saturating_sub(inserted) < ttl);
    }

    pub fn remove_ids(&mut self, ids: &BTreeSet<u64>) {
        self.entries.retain(|(inst, _)| !ids.contains(&inst.id));
    }

    pub fn entries(&self) -> &[(Instance<F>, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Absorbs one instance into a prototype: running-mean centroid, radius grown
/// to keep the point covered, running mean distance, support, and (when the
/// label is confirmed) the histogram.
pub fn update_prototype<F: Real>(
    p: &Prototype<F>,
    x: &[F],
    assigned: Option<LabelId>,
) -> Result<Prototype<F>> {
    if x.len() != p.dim() {
        return Err(EngineError::DimensionMismatch { left: p.dim(), right: x.len() });
    }
    let s = F::from_count(p.support);
    let s1 = F::from_count(p.support + 1);
    let centroid: Vec<F> =
        p.centroid.iter().zip(x).map(|(&c, &xi)| (s * c + xi) / s1).collect();
    let d = distance(x, &centroid)?;
    let radius = if d > p.radius { d } else { p.radius };
    let mean_distance = (p.mean_distance * s + d) / s1;
    let mut frequencies = p.frequencies.clone();
    if let Some(label) = assigned {
        *frequencies.entry(label).or_insert(0) += 1;
    }
    Ok(Prototype { centroid, radius, mean_distance, support: p.support + 1, frequencies })
}

fn mean<F: Real>(values: &[F]) -> F {
    values.iter().copied().sum::<F>() / F::from_count(values.len())
}

fn sort_scalars<F: Real>(values: &mut [F]) {
    values.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
}

/// Core of the separation score, shared by [`qnsc`] and the buffer scan.
/// `None` when fewer than `q` peers exist. Callers guarantee `q >= 1` and a
/// non-empty centroid distance list.
fn qnsc_from_distances<F: Real>(
    mut peer_dists: Vec<F>,
    mut centroid_dists: Vec<F>,
    q: usize,
) -> Option<F> {
    if peer_dists.len() < q {
        return None;
    }
    sort_scalars(&mut peer_dists);
    sort_scalars(&mut centroid_dists);
    let d_in = mean(&peer_dists[..q]);
    let d_out = mean(&centroid_dists[..q.min(centroid_dists.len())]);
    if d_in == F::zero() && d_out == F::zero() {
        return Some(F::zero());
    }
    let max = if d_out > d_in { d_out } else { d_in };
    Some((d_out - d_in) / max)
}

/// q-neighborhood separation score of `x` against its buffered peers and the
/// ensemble's prototype centroids:
///
/// ```text
/// (d_out - d_in) / max(d_out, d_in)   in [-1, 1]
/// ```
///
/// where `d_in` is the mean distance to the `q` nearest peers and `d_out` the
/// mean distance to the `q` nearest centroids (fewer centroids: all of them).
/// Positive means `x` sits closer to its peers than to anything the ensemble
/// knows. `None` when fewer than `q` peers exist yet.
pub fn qnsc<F: Real>(
    x: &[F],
    peers: &[Vec<F>],
    ensemble: &[HeuristicFunction<F>],
    q: usize,
) -> Result<Option<F>> {
    if q == 0 {
        return Err(EngineError::config("q must be at least 1"));
    }
    if peers.len() < q {
        return Ok(None);
    }
    let peer_dists: Vec<F> =
        peers.iter().map(|p| distance(x, p)).collect::<Result<_>>()?;
    let centroid_dists = centroid_distances(x, ensemble)?;
    Ok(qnsc_from_distances(peer_dists, centroid_dists, q))
}

fn centroid_distances<F: Real>(x: &[F], ensemble: &[HeuristicFunction<F>]) -> Result<Vec<F>> {
    let mut dists = Vec::new();
    for h in ensemble {
        for p in &h.prototypes {
            dists.push(distance(x, &p.centroid)?);
        }
    }
    if dists.is_empty() {
        return Err(EngineError::contract("ensemble holds no prototypes"));
    }
    Ok(dists)
}

fn founding_seed(engine_seed: u64, label: LabelId) -> u64 {
    engine_seed ^ (u64::from(label.0) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Everything that evolves while the stream runs.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineState<F = f64> {
    pub label_space: LabelSpace,
    pub ensemble: Vec<HeuristicFunction<F>>,
    pub buffer: NoveltyBuffer<F>,
    /// Index of the next chunk to process.
    pub chunk_counter: usize,
    /// Every decision emitted so far, in emission order. Retroactive
    /// decisions for the same instance appear later than the original.
    pub decisions: Vec<LabelDecision<F>>,
    /// Engine seed; founding clusterings derive their seeds from it.
    pub seed: u64,
}

impl<F: Real> EngineState<F> {
    /// Builds the initial state: the ensemble is generated from the labeled
    /// seed set and the label space starts with the labels seen there.
    pub fn new(labeled: &[(Vec<F>, LabelId)], cfg: &StreamConfig<F>) -> Result<Self> {
        let a = &cfg.adaptation;
        if a.q == 0 || a.min_cohort == 0 || a.check_period == 0 || a.new_label_k == 0 {
            return Err(EngineError::config(
                "q, min_cohort, check_period, and new_label_k must all be at least 1",
            ));
        }
        let ensemble = generate_heuristics(labeled, &cfg.ensemble)?;
        let label_space = LabelSpace::from_seed(labeled.iter().map(|&(_, l)| l));
        Ok(EngineState {
            label_space,
            ensemble,
            buffer: NoveltyBuffer::new(a.ttl_chunks),
            chunk_counter: 0,
            decisions: Vec::new(),
            seed: cfg.ensemble.seed,
        })
    }

    pub fn total_prototypes(&self) -> usize {
        self.ensemble.iter().map(|h| h.prototypes.len()).sum()
    }

    /// Runs one chunk through the full lifecycle and returns the decisions
    /// emitted during the call (per-instance ones first, then any
    /// retroactive founding decisions).
    pub fn process_chunk(
        &mut self,
        chunk: &Chunk<F>,
        cfg: &StreamConfig<F>,
    ) -> Result<Vec<LabelDecision<F>>> {
        if chunk.index != self.chunk_counter {
            return Err(EngineError::contract(format!(
                "chunk {} fed to an engine expecting chunk {}",
                chunk.index, self.chunk_counter
            )));
        }
        let current = self.chunk_counter;
        let first_new = self.decisions.len();

        // Which (member, prototype) absorbed each instance; used afterwards
        // to credit confirmed labels.
        let mut absorbed: Vec<Vec<(usize, usize)>> = Vec::with_capacity(chunk.instances.len());
        for inst in &chunk.instances {
            let mut hits = Vec::new();
            for (hi, h) in self.ensemble.iter_mut().enumerate() {
                if h.prototypes.is_empty() {
                    continue;
                }
                let (pi, _) = nearest_prototype(h, &inst.features)?;
                if covers(&h.prototypes[pi], &inst.features, cfg.ensemble.slack)? {
                    h.prototypes[pi] = update_prototype(&h.prototypes[pi], &inst.features, None)?;
                    hits.push((hi, pi));
                }
            }
            let decision = aggregate_result(inst, &self.ensemble, &cfg.ensemble)?
                .into_decision(inst.id, current, cfg.ensemble.tau);
            if !decision.outcome.is_assigned() {
                self.buffer.push(inst.clone(), current);
            }
            self.decisions.push(decision);
            absorbed.push(hits);
        }

        for (offset, hits) in absorbed.iter().enumerate() {
            if let Outcome::Assigned { label, .. } = self.decisions[first_new + offset].outcome {
                for &(hi, pi) in hits {
                    self.ensemble[hi].prototypes[pi].record_label(label);
                }
            }
        }

        self.buffer.evict_expired(current);
        if current % cfg.adaptation.check_period == 0 {
            if let Some(cohort) = self.scan_buffer(cfg)? {
                self.found_new_label(cohort, cfg)?;
            }
        }
        self.enforce_cap(cfg.adaptation.max_prototypes)?;
        self.chunk_counter += 1;
        Ok(self.decisions[first_new..].to_vec())
    }

    /// Scans the buffer for the largest mutually-cohesive cohort of
    /// positively-separated entries. Returns its instances (in insertion
    /// order) when it reaches `min_cohort`, otherwise `None`.
    pub fn scan_buffer(&self, cfg: &StreamConfig<F>) -> Result<Option<Vec<Instance<F>>>> {
        let q = cfg.adaptation.q;
        let entries = self.buffer.entries();
        let n = entries.len();
        if n < cfg.adaptation.min_cohort || n < q + 1 {
            return Ok(None);
        }

        let mut pair = vec![vec![F::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(&entries[i].0.features, &entries[j].0.features)?;
                pair[i][j] = d;
                pair[j][i] = d;
            }
        }

        let mut candidates: Vec<usize> = Vec::new();
        for i in 0..n {
            let peer_dists: Vec<F> =
                (0..n).filter(|&j| j != i).map(|j| pair[i][j]).collect();
            let centroid_dists = centroid_distances(&entries[i].0.features, &self.ensemble)?;
            if let Some(score) = qnsc_from_distances(peer_dists, centroid_dists, q) {
                if score > F::zero() {
                    candidates.push(i);
                }
            }
        }
        if candidates.len() < cfg.adaptation.min_cohort {
            return Ok(None);
        }

        // Mutual q-nearest-neighbor graph restricted to the candidates.
        // Neighbor lists order by (distance, insertion order).
        let m = candidates.len();
        let mut knn: Vec<BTreeSet<usize>> = Vec::with_capacity(m);
        for (ci, &i) in candidates.iter().enumerate() {
            let mut others: Vec<(F, usize)> = candidates
                .iter()
                .enumerate()
                .filter(|&(cj, _)| cj != ci)
                .map(|(cj, &j)| (pair[i][j], cj))
                .collect();
            others.sort_by(|a, b| {
                a.0.partial_cmp(&b.0).expect("distances are finite").then(a.1.cmp(&b.1))
            });
            knn.push(others.into_iter().take(q).map(|(_, cj)| cj).collect());
        }
        let mut mutual: Vec<Vec<usize>> = vec![Vec::new(); m];
        for ci in 0..m {
            for &cj in &knn[ci] {
                if knn[cj].contains(&ci) {
                    mutual[ci].push(cj);
                }
            }
        }

        // Largest connected component; size ties keep the component holding
        // the earliest-buffered candidate (found first below).
        let mut visited = vec![false; m];
        let mut best: Vec<usize> = Vec::new();
        for start in 0..m {
            if visited[start] {
                continue;
            }
            let mut component = vec![start];
            visited[start] = true;
            let mut head = 0;
            while head < component.len() {
                let ci = component[head];
                head += 1;
                for &cj in &mutual[ci] {
                    if !visited[cj] {
                        visited[cj] = true;
                        component.push(cj);
                    }
                }
            }
            if component.len() > best.len() {
                best = component;
            }
        }
        if best.len() < cfg.adaptation.min_cohort {
            return Ok(None);
        }
        best.sort_unstable();
        Ok(Some(best.into_iter().map(|ci| entries[candidates[ci]].0.clone()).collect()))
    }

    /// Founds a new label from a cohort: allocates the next id, clusters the
    /// cohort into prototypes carrying only that label, appends them to every
    /// ensemble member, drops the cohort from the buffer, and emits
    /// retroactive assignments for its instances.
    pub fn found_new_label(
        &mut self,
        cohort: Vec<Instance<F>>,
        cfg: &StreamConfig<F>,
    ) -> Result<LabelId> {
        if cohort.is_empty() {
            return Err(EngineError::contract("founding needs a non-empty cohort"));
        }
        let label = self.label_space.allocate(self.chunk_counter);
        let points: Vec<ClusterPoint<F>> =
            cohort.iter().map(|i| (i.features.clone(), Some(label))).collect();
        let ccfg = ClusteringConfig {
            k: cfg.adaptation.new_label_k.min(cohort.len()),
            lambda: cfg.ensemble.lambda,
            max_iters: cfg.ensemble.max_iters,
            seed: founding_seed(self.seed, label),
        };
        let prototypes = impurity_kmeans(&points, &ccfg)?;
        for h in &mut self.ensemble {
            h.prototypes.extend(prototypes.iter().cloned());
        }
        let ids: BTreeSet<u64> = cohort.iter().map(|i| i.id).collect();
        self.buffer.remove_ids(&ids);
        for inst in &cohort {
            self.decisions.push(LabelDecision {
                instance_id: inst.id,
                chunk: self.chunk_counter,
                outcome: Outcome::Assigned { label, score: F::one() },
                votes: Vec::new(),
                retroactive: true,
            });
        }
        Ok(label)
    }

    /// Evicts prototypes until the ensemble-wide count fits the cap.
    /// Eviction order: smallest support first, then earliest position within
    /// its member, then smallest member id. A prototype that is the sole
    /// carrier of some label is never evicted; if only such prototypes
    /// remain the cap is unsatisfiable and this errors.
    pub fn enforce_cap(&mut self, max_prototypes: usize) -> Result<usize> {
        let mut evicted = 0;
        while self.total_prototypes() > max_prototypes {
            let mut carriers: BTreeMap<LabelId, usize> = BTreeMap::new();
            for h in &self.ensemble {
                for p in &h.prototypes {
                    for (&l, &c) in &p.frequencies {
                        if c > 0 {
                            *carriers.entry(l).or_insert(0) += 1;
                        }
                    }
                }
            }
            let mut victim: Option<(usize, usize, usize)> = None;
            for (hi, h) in self.ensemble.iter().enumerate() {
                for (pi, p) in h.prototypes.iter().enumerate() {
                    let sole_carrier =
                        p.frequencies.iter().any(|(l, &c)| c > 0 && carriers[l] == 1);
                    if sole_carrier {
                        continue;
                    }
                    let key = (p.support, pi, hi);
                    match victim {
                        Some(v) if key >= v => {}
                        _ => victim = Some(key),
                    }
                }
            }
            let Some((_, pi, hi)) = victim else {
                return Err(EngineError::config(format!(
                    "prototype cap {max_prototypes} cannot be met without erasing a label"
                )));
            };
            self.ensemble[hi].prototypes.remove(pi);
            evicted += 1;
        }
        Ok(evicted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn proto_at(centroid: Vec<f64>, label: u32) -> Prototype {
        Prototype {
            centroid,
            radius: 1.0,
            mean_distance: 0.5,
            support: 3,
            frequencies: [(LabelId(label), 3)].into_iter().collect(),
        }
    }

    fn hf(id: u32, prototypes: Vec<Prototype>) -> HeuristicFunction {
        HeuristicFunction { id, prototypes, rng_seed: 0 }
    }

    fn inst(id: u64, features: Vec<f64>) -> Instance {
        Instance::new(id, features, None, id as usize)
    }

    #[test]
    fn update_prototype_pulls_centroid_and_grows_radius() {
        let p = Prototype {
            centroid: vec![0.0, 0.0],
            radius: 1.0,
            mean_distance: 0.5,
            support: 4,
            frequencies: [(LabelId(0), 4)].into_iter().collect(),
        };
        let updated = update_prototype(&p, &[2.0, 0.0], Some(LabelId(0))).unwrap();
        assert_eq!(updated.centroid, vec![0.4, 0.0]);
        assert_relative_eq!(updated.radius, 1.6, max_relative = 1e-12);
        assert_relative_eq!(updated.mean_distance, 0.72, max_relative = 1e-12);
        assert_eq!(updated.support, 5);
        assert_eq!(updated.frequencies[&LabelId(0)], 5);
    }

    #[test]
    fn update_prototype_keeps_radius_for_interior_points() {
        let p = Prototype {
            centroid: vec![0.0, 0.0],
            radius: 2.0,
            mean_distance: 1.0,
            support: 1,
            frequencies: BTreeMap::new(),
        };
        let updated = update_prototype(&p, &[1.0, 0.0], None).unwrap();
        assert_eq!(updated.centroid, vec![0.5, 0.0]);
        assert_eq!(updated.radius, 2.0);
        assert_relative_eq!(updated.mean_distance, 0.75, max_relative = 1e-12);
        assert_eq!(updated.support, 2);
        assert!(updated.frequencies.is_empty());
    }

    #[test]
    fn update_prototype_rejects_wrong_dimension() {
        let p = proto_at(vec![0.0, 0.0], 0);
        assert!(matches!(
            update_prototype(&p, &[1.0], None),
            Err(EngineError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn qnsc_examples() {
        let ensemble = vec![hf(0, vec![proto_at(vec![4.0, 0.0], 0), proto_at(vec![0.0, 4.0], 0)])];
        let peers = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let v = qnsc(&[0.0, 0.0], &peers, &ensemble, 2).unwrap().unwrap();
        assert_relative_eq!(v, 0.75, max_relative = 1e-12);

        let near = vec![hf(0, vec![proto_at(vec![2.0, 0.0], 0), proto_at(vec![0.0, 2.0], 0)])];
        let far_peers = vec![vec![4.0, 0.0], vec![0.0, -4.0]];
        let v = qnsc(&[0.0, 0.0], &far_peers, &near, 2).unwrap().unwrap();
        assert_relative_eq!(v, -0.5, max_relative = 1e-12);
    }

    #[test]
    fn qnsc_is_zero_when_everything_coincides() {
        let ensemble =
            vec![hf(0, vec![proto_at(vec![0.0, 0.0], 0), proto_at(vec![0.0, 0.0], 0)])];
        let peers = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(qnsc(&[0.0, 0.0], &peers, &ensemble, 2).unwrap(), Some(0.0));
    }

    #[test]
    fn qnsc_not_ready_with_too_few_peers() {
        let ensemble = vec![hf(0, vec![proto_at(vec![4.0, 0.0], 0)])];
        let peers = vec![vec![1.0, 0.0]];
        assert_eq!(qnsc(&[0.0, 0.0], &peers, &ensemble, 2).unwrap(), None);
    }

    #[test]
    fn qnsc_uses_all_centroids_when_fewer_than_q() {
        let ensemble = vec![hf(0, vec![proto_at(vec![3.0, 0.0], 0), proto_at(vec![0.0, 3.0], 0)])];
        let peers: Vec<Vec<f64>> = (0..5).map(|_| vec![1.0, 0.0]).collect();
        let v = qnsc(&[0.0, 0.0], &peers, &ensemble, 5).unwrap().unwrap();
        // d_in = 1 over five peers, d_out = 3 over only two centroids
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-12);
    }

    fn state_with(
        ensemble: Vec<HeuristicFunction>,
        buffered: Vec<Instance>,
        seed_labels: &[u32],
    ) -> EngineState {
        let mut buffer = NoveltyBuffer::new(50);
        for b in buffered {
            buffer.push(b, 0);
        }
        EngineState {
            label_space: LabelSpace::from_seed(seed_labels.iter().map(|&l| LabelId(l))),
            ensemble,
            buffer,
            chunk_counter: 1,
            decisions: Vec::new(),
            seed: 42,
        }
    }

    fn blob(center: (f64, f64), count: usize, first_id: u64) -> Vec<Instance> {
        (0..count)
            .map(|i| {
                let angle = i as f64 * 2.399963; // golden-angle spread, radius <= 0.5
                let r = 0.5 * (i as f64 + 1.0) / count as f64;
                inst(
                    first_id + i as u64,
                    vec![center.0 + r * angle.cos(), center.1 + r * angle.sin()],
                )
            })
            .collect()
    }

    #[test]
    fn scan_finds_a_tight_far_cohort() {
        let ensemble = vec![
            hf(0, vec![proto_at(vec![0.0, 0.0], 0), proto_at(vec![2.0, 0.0], 1)]),
            hf(1, vec![proto_at(vec![0.5, 0.5], 0), proto_at(vec![2.0, 0.5], 1)]),
        ];
        let state = state_with(ensemble, blob((20.0, 20.0), 10, 100), &[0, 1]);
        let cfg = StreamConfig::default();
        let cohort = state.scan_buffer(&cfg).unwrap().expect("cohort expected");
        assert_eq!(cohort.len(), 10);
        assert_eq!(cohort[0].id, 100); // insertion order preserved
    }

    #[test]
    fn scan_ignores_entries_hugging_the_prototypes() {
        // Each buffered instance sits in a dense station of five prototypes,
        // far from every peer: separation is negative everywhere.
        let mut protos = Vec::new();
        let mut buffered = Vec::new();
        for s in 0..6 {
            let cx = 10.0 * s as f64;
            for k in 0..5 {
                protos.push(proto_at(vec![cx + 0.05 * k as f64, 0.0], 0));
            }
            buffered.push(inst(200 + s as u64, vec![cx, 0.3]));
        }
        let state = state_with(vec![hf(0, protos)], buffered, &[0]);
        let cfg = StreamConfig::default();
        assert_eq!(state.scan_buffer(&cfg).unwrap(), None);
    }

    #[test]
    fn scan_picks_the_larger_of_two_cohorts() {
        let ensemble = vec![hf(0, vec![proto_at(vec![0.0, 0.0], 0)])];
        let mut buffered = blob((30.0, 30.0), 6, 300);
        buffered.extend(blob((-30.0, 30.0), 3, 400));
        let state = state_with(ensemble, buffered, &[0]);
        let cfg = StreamConfig::default();
        let cohort = state.scan_buffer(&cfg).unwrap().expect("cohort expected");
        assert_eq!(cohort.len(), 6);
        assert!(cohort.iter().all(|i| (300..306).contains(&i.id)));
    }

    #[test]
    fn scan_requires_min_cohort() {
        let ensemble = vec![hf(0, vec![proto_at(vec![0.0, 0.0], 0)])];
        let state = state_with(ensemble, blob((30.0, 30.0), 10, 0), &[0]);
        let mut cfg = StreamConfig::default();
        cfg.adaptation.min_cohort = 11;
        assert_eq!(state.scan_buffer(&cfg).unwrap(), None);
    }

    #[test]
    fn founding_replicates_prototypes_and_emits_retroactive_decisions() {
        let ensemble = vec![
            hf(0, vec![proto_at(vec![0.0, 0.0], 0), proto_at(vec![2.0, 0.0], 1)]),
            hf(1, vec![proto_at(vec![0.5, 0.5], 0), proto_at(vec![2.0, 0.5], 1)]),
        ];
        let cohort = blob((20.0, 20.0), 7, 100);
        let mut state = state_with(ensemble, cohort.clone(), &[0, 1]);
        let cfg = StreamConfig::default();

        let label = state.found_new_label(cohort, &cfg).unwrap();
        assert_eq!(label, LabelId(2));
        assert_eq!(state.label_space.discovered().len(), 1);
        assert_eq!(state.label_space.discovered()[0].founding_chunk, 1);

        // new_label_k = 3 prototypes appended to each member, all pure
        for h in &state.ensemble {
            assert_eq!(h.len(), 5);
            for p in &h.prototypes[2..] {
                assert_eq!(p.frequencies.keys().copied().collect::<Vec<_>>(), vec![label]);
            }
        }
        assert!(state.buffer.is_empty());

        let retro: Vec<_> = state.decisions.iter().filter(|d| d.retroactive).collect();
        assert_eq!(retro.len(), 7);
        for d in &retro {
            assert_eq!(d.outcome, Outcome::Assigned { label, score: 1.0 });
            assert_eq!(d.chunk, 1);
        }

        // replay: an interior point of the founded region (the widest founded
        // prototype's own centroid) now labels directly with full agreement
        let widest = state.ensemble[0].prototypes[2..]
            .iter()
            .max_by(|a, b| a.radius.partial_cmp(&b.radius).unwrap())
            .unwrap();
        let mid = inst(999, widest.centroid.clone());
        let decision = crate::ensemble::aggregate(&mid, &state.ensemble, &cfg.ensemble).unwrap();
        assert_eq!(decision.outcome, Outcome::Assigned { label, score: 1.0 });
    }

    #[test]
    fn founding_caps_k_at_cohort_size() {
        let ensemble = vec![hf(0, vec![proto_at(vec![0.0, 0.0], 0)])];
        let cohort = blob((20.0, 20.0), 2, 100);
        let mut state = state_with(ensemble, cohort.clone(), &[0]);
        let cfg = StreamConfig::default();
        state.found_new_label(cohort, &cfg).unwrap();
        assert_eq!(state.ensemble[0].len(), 3); // 1 seeded + min(3, 2) founded
    }

    fn labeled_proto(centroid: Vec<f64>, support: usize, label: u32) -> Prototype {
        Prototype {
            centroid,
            radius: 1.0,
            mean_distance: 0.5,
            support,
            frequencies: [(LabelId(label), support)].into_iter().collect(),
        }
    }

    #[test]
    fn cap_evicts_smallest_support_but_spares_sole_carriers() {
        let protos = vec![
            labeled_proto(vec![0.0], 5, 0), // sole carrier of label 0
            labeled_proto(vec![1.0], 1, 1),
            labeled_proto(vec![2.0], 3, 1),
        ];
        let mut state = state_with(vec![hf(0, protos)], Vec::new(), &[0, 1]);
        let evicted = state.enforce_cap(2).unwrap();
        assert_eq!(evicted, 1);
        let remaining: Vec<f64> =
            state.ensemble[0].prototypes.iter().map(|p| p.centroid[0]).collect();
        assert_eq!(remaining, vec![0.0, 2.0]);
    }

    #[test]
    fn cap_breaks_support_ties_by_position_then_member() {
        let ensemble = vec![
            hf(0, vec![labeled_proto(vec![0.0], 2, 0), labeled_proto(vec![1.0], 2, 0)]),
            hf(1, vec![labeled_proto(vec![2.0], 2, 0), labeled_proto(vec![3.0], 2, 0)]),
        ];
        let mut state = state_with(ensemble, Vec::new(), &[0]);
        state.enforce_cap(3).unwrap();
        // (support, position, member) is minimal for member 0 position 0
        let hf0: Vec<f64> = state.ensemble[0].prototypes.iter().map(|p| p.centroid[0]).collect();
        assert_eq!(hf0, vec![1.0]);
        assert_eq!(state.ensemble[1].len(), 2);
    }

    #[test]
    fn cap_errors_when_only_sole_carriers_remain() {
        let protos = vec![labeled_proto(vec![0.0], 1, 0), labeled_proto(vec![1.0], 1, 1)];
        let mut state = state_with(vec![hf(0, protos)], Vec::new(), &[0, 1]);
        assert!(matches!(state.enforce_cap(1), Err(EngineError::Config(_))));
    }

    #[test]
    fn buffer_ttl_keeps_only_young_entries() {
        let mut buffer: NoveltyBuffer = NoveltyBuffer::new(2);
        buffer.push(inst(0, vec![0.0]), 0);
        buffer.push(inst(1, vec![0.0]), 1);
        buffer.push(inst(2, vec![0.0]), 2);
        buffer.evict_expired(2);
        let kept: Vec<u64> = buffer.entries().iter().map(|(i, _)| i.id).collect();
        assert_eq!(kept, vec![1, 2]);
    }

    // ---- end-to-end chunk processing on a generated ensemble ----

    fn training_blobs() -> Vec<(Vec<f64>, LabelId)> {
        let mut rows = Vec::new();
        for (label, center) in [(0u32, (0.0, 0.0)), (1u32, (12.0, 12.0))] {
            for i in 0..30 {
                let angle = i as f64 * 0.7;
                let r = 0.8 * (i % 5) as f64 / 5.0;
                rows.push((
                    vec![center.0 + r * angle.cos(), center.1 + r * angle.sin()],
                    LabelId(label),
                ));
            }
        }
        rows
    }

    fn small_config() -> StreamConfig {
        let ensemble = EnsembleConfig { num_hf: 2, k_per_hf: 4, seed: 7, ..Default::default() };
        let adaptation = AdaptationConfig::for_ensemble(&ensemble);
        StreamConfig { ensemble, adaptation }
    }

    #[test]
    fn chunk_of_known_instances_is_fully_assigned() {
        let cfg = small_config();
        let mut state = EngineState::new(&training_blobs(), &cfg).unwrap();
        let support_before: usize =
            state.ensemble.iter().flat_map(|h| &h.prototypes).map(|p| p.support).sum();

        let mut instances = Vec::new();
        for i in 0..5 {
            instances.push(inst(i, vec![0.05 * i as f64, 0.0]));
            instances.push(inst(5 + i, vec![12.0 + 0.05 * i as f64, 12.0]));
        }
        let chunk = Chunk { index: 0, instances };
        let decisions = state.process_chunk(&chunk, &cfg).unwrap();

        assert_eq!(decisions.len(), 10);
        for d in &decisions {
            let expect = if d.instance_id < 5 { LabelId(0) } else { LabelId(1) };
            assert_eq!(d.outcome.label(), Some(expect), "instance {}", d.instance_id);
        }
        assert!(state.buffer.is_empty());
        assert_eq!(state.chunk_counter, 1);

        // every instance was absorbed by both members (geometric growth) and
        // credited back to the histogram of the absorbing prototypes
        let support_after: usize =
            state.ensemble.iter().flat_map(|h| &h.prototypes).map(|p| p.support).sum();
        assert_eq!(support_after, support_before + 20);
        let credited: usize = state
            .ensemble
            .iter()
            .flat_map(|h| &h.prototypes)
            .map(|p| p.total_frequency())
            .sum::<usize>();
        let baseline: usize = 2 * training_blobs().len(); // bootstrap keeps row count
        assert_eq!(credited, baseline + 20);
    }

    #[test]
    fn chunk_of_alien_instances_defers_into_the_buffer() {
        let cfg = {
            let mut c = small_config();
            c.adaptation.min_cohort = 100; // founding disabled for this test
            c
        };
        let mut state = EngineState::new(&training_blobs(), &cfg).unwrap();
        let chunk = Chunk { index: 0, instances: blob((200.0, -200.0), 8, 0) };
        let decisions = state.process_chunk(&chunk, &cfg).unwrap();
        assert!(decisions.iter().all(|d| d.outcome == Outcome::Deferred));
        assert_eq!(state.buffer.len(), 8);
    }

    #[test]
    fn novel_blob_is_founded_then_labeled_directly() {
        let cfg = small_config();
        let mut state = EngineState::new(&training_blobs(), &cfg).unwrap();

        let chunk0 = Chunk { index: 0, instances: blob((25.0, 25.0), 8, 0) };
        let emitted = state.process_chunk(&chunk0, &cfg).unwrap();
        assert_eq!(state.label_space.discovered().len(), 1);
        let novel = state.label_space.discovered()[0].id;
        assert_eq!(novel, LabelId(2));
        assert_eq!(state.label_space.discovered()[0].founding_chunk, 0);
        // 8 deferred decisions plus 8 retroactive assignments, same call
        assert_eq!(emitted.len(), 16);
        assert!(emitted[..8].iter().all(|d| d.outcome == Outcome::Deferred));
        assert!(emitted[8..]
            .iter()
            .all(|d| d.retroactive && d.outcome == Outcome::Assigned { label: novel, score: 1.0 }));
        assert!(state.buffer.is_empty());

        // follow-up instances from the interior of the founded region are
        // labeled directly (boundary points may legitimately still defer)
        let widest = state.ensemble[0].prototypes[4..]
            .iter()
            .max_by(|a, b| a.radius.partial_cmp(&b.radius).unwrap())
            .unwrap();
        assert!(widest.radius > 0.0);
        let spread = 0.4 * widest.radius;
        let instances: Vec<Instance> = (0..5)
            .map(|i| {
                let angle = i as f64 * 2.399963;
                inst(
                    50 + i,
                    vec![
                        widest.centroid[0] + spread * angle.cos(),
                        widest.centroid[1] + spread * angle.sin(),
                    ],
                )
            })
            .collect();
        let chunk1 = Chunk { index: 1, instances };
        let decisions = state.process_chunk(&chunk1, &cfg).unwrap();
        assert!(decisions.iter().all(|d| d.outcome.label() == Some(novel)));
    }

    #[test]
    fn chunks_must_arrive_in_order() {
        let cfg = small_config();
        let mut state = EngineState::new(&training_blobs(), &cfg).unwrap();
        let chunk = Chunk { index: 3, instances: vec![inst(0, vec![0.0, 0.0])] };
        assert!(matches!(state.process_chunk(&chunk, &cfg), Err(EngineError::Contract(_))));
    }

    #[test]
    fn processing_is_deterministic() {
        let cfg = small_config();
        let run = || {
            let mut state = EngineState::new(&training_blobs(), &cfg).unwrap();
            for index in 0..3 {
                let mut instances = blob((25.0, 25.0), 4, 100 * index as u64);
                instances.extend(blob((0.0, 0.0), 4, 100 * index as u64 + 50));
                state.process_chunk(&Chunk { index, instances }, &cfg).unwrap();
            }
            state
        };
        let a = run();
        let b = run();
        assert_eq!(a.decisions, b.decisions);
        assert_eq!(a.ensemble, b.ensemble);
        assert_eq!(a.label_space, b.label_space);
    }

    #[test]
    fn config_validation_rejects_zero_knobs() {
        let mut cfg = small_config();
        cfg.adaptation.check_period = 0;
        assert!(matches!(
            EngineState::new(&training_blobs(), &cfg),
            Err(EngineError::Config(_))
        ));
    }

    proptest! {
        // The separation score is a normalized contrast: always in [-1, 1].
        #[test]
        fn qnsc_stays_in_unit_band(
            x in prop::collection::vec(-50.0f64..50.0, 2),
            peers in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2), 1..12),
            cents in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2), 1..6),
            q in 1usize..6,
        ) {
            let ensemble = vec![hf(0, cents.into_iter().map(|c| proto_at(c, 0)).collect())];
            if let Some(v) = qnsc(&x, &peers, &ensemble, q).unwrap() {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        // Absorbing a point never lets the mean distance exceed the radius.
        #[test]
        fn update_preserves_mean_below_radius(
            cx in -10.0f64..10.0,
            cy in -10.0f64..10.0,
            r in 0.0f64..5.0,
            frac in 0.0f64..1.0,
            support in 1usize..50,
            px in -20.0f64..20.0,
            py in -20.0f64..20.0,
        ) {
            let p = Prototype {
                centroid: vec![cx, cy],
                radius: r,
                mean_distance: r * frac,
                support,
                frequencies: BTreeMap::new(),
            };
            let updated = update_prototype(&p, &[px, py], None).unwrap();
            prop_assert!(updated.mean_distance <= updated.radius + 1e-9);
            prop_assert!(updated.radius >= p.radius);
            prop_assert_eq!(updated.support, support + 1);
        }
    }
}

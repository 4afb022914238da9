//! Synthetic Gaussian-blob streams with scheduled novel-class arrivals.
//!
//! Classes are isotropic Gaussian blobs whose centers sit on a circle wide
//! enough that neighboring centers are `separation` apart. The stream is
//! produced chunk by chunk: seed classes share the probability mass evenly,
//! and each novel class starts claiming a fixed share of every chunk from
//! its injection chunk onward. Per-chunk class counts follow the exact mix
//! by largest-remainder rounding, so the composition is deterministic.

use std::f64::consts::PI;
use std::path::Path;

use autolabel_core::LabelId;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{write_csv, DataRow};
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dims: usize,
    /// Classes present in the training data.
    pub seed_classes: usize,
    /// Classes that only ever appear in the stream.
    pub novel_classes: usize,
    /// Chunk at which each novel class starts appearing (one per class).
    pub injections: Vec<usize>,
    pub train_per_class: usize,
    pub stream_instances: usize,
    pub chunk_size: usize,
    /// Distance between neighboring class centers.
    pub separation: f64,
    /// Standard deviation of every blob.
    pub sigma: f64,
    /// Share of each chunk an active novel class claims.
    pub novel_share: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            dims: 2,
            seed_classes: 3,
            novel_classes: 2,
            injections: vec![10, 25],
            train_per_class: 600,
            stream_instances: 1000,
            chunk_size: 20,
            separation: 8.0,
            sigma: 0.5,
            novel_share: 0.25,
            seed: 0,
        }
    }
}

/// Facts about a generated dataset that evaluation needs later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMeta {
    pub dims: usize,
    pub sigma: f64,
    pub separation: f64,
    pub seed: u64,
    pub chunk_size: usize,
    pub seed_labels: Vec<u32>,
    pub novel_labels: Vec<u32>,
    /// `(label, chunk)` pairs: when each novel class enters the stream.
    pub injections: Vec<(u32, usize)>,
    pub train_rows: usize,
    pub stream_rows: usize,
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub train: Vec<DataRow>,
    pub stream: Vec<DataRow>,
    pub meta: SyntheticMeta,
}

/// Integer counts matching `weights` over `n` slots: floor everything, then
/// hand the remaining slots to the largest fractional remainders (ties to
/// the smallest index).
pub fn largest_remainder_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).expect("weights are finite").then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

fn validate(cfg: &SyntheticConfig) -> Result<()> {
    if cfg.dims == 0 {
        return Err(CliError::config("dims must be at least 1"));
    }
    if cfg.seed_classes == 0 {
        return Err(CliError::config("seed_classes must be at least 1"));
    }
    if cfg.injections.len() != cfg.novel_classes {
        return Err(CliError::config(format!(
            "need one injection chunk per novel class: {} classes, {} injections",
            cfg.novel_classes,
            cfg.injections.len()
        )));
    }
    if cfg.novel_classes > 0
        && (cfg.novel_share <= 0.0 || cfg.novel_share * cfg.novel_classes as f64 >= 1.0)
    {
        return Err(CliError::config(
            "novel_share must be positive and leave mass for the seed classes",
        ));
    }
    if cfg.train_per_class == 0 || cfg.stream_instances == 0 || cfg.chunk_size == 0 {
        return Err(CliError::config("train, stream, and chunk sizes must be positive"));
    }
    if cfg.sigma <= 0.0 || cfg.separation <= 0.0 {
        return Err(CliError::config("sigma and separation must be positive"));
    }
    Ok(())
}

/// Blob centers for `count` classes, neighboring centers `separation` apart.
fn class_centers(count: usize, dims: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|c| {
            let mut center = vec![0.0; dims];
            if count == 1 {
                return center;
            }
            if dims == 1 {
                center[0] = c as f64 * separation;
            } else {
                let radius = separation / (2.0 * (PI / count as f64).sin());
                let theta = 2.0 * PI * c as f64 / count as f64;
                center[0] = radius * theta.cos();
                center[1] = radius * theta.sin();
            }
            center
        })
        .collect()
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    validate(cfg)?;
    let total_classes = cfg.seed_classes + cfg.novel_classes;
    let centers = class_centers(total_classes, cfg.dims, cfg.separation);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.sigma).expect("sigma is positive");
    let sample = |class: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        centers[class].iter().map(|&c| c + noise.sample(rng)).collect()
    };

    let mut next_id: u64 = 0;
    let mut train = Vec::with_capacity(cfg.seed_classes * cfg.train_per_class);
    for class in 0..cfg.seed_classes {
        for _ in 0..cfg.train_per_class {
            train.push(DataRow {
                id: next_id,
                features: sample(class, &mut rng),
                label: Some(LabelId(class as u32)),
            });
            next_id += 1;
        }
    }

    let mut stream = Vec::with_capacity(cfg.stream_instances);
    let mut produced = 0;
    let mut chunk_index = 0;
    while produced < cfg.stream_instances {
        let chunk_n = cfg.chunk_size.min(cfg.stream_instances - produced);
        let active: Vec<usize> = (0..cfg.novel_classes)
            .filter(|&k| cfg.injections[k] <= chunk_index)
            .collect();
        let seed_share = (1.0 - cfg.novel_share * active.len() as f64) / cfg.seed_classes as f64;
        let mut weights = vec![seed_share; cfg.seed_classes];
        for k in 0..cfg.novel_classes {
            weights.push(if active.contains(&k) { cfg.novel_share } else { 0.0 });
        }
        let counts = largest_remainder_counts(&weights, chunk_n);
        let mut labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(class, &count)| std::iter::repeat(class).take(count))
            .collect();
        labels.shuffle(&mut rng);
        for class in labels {
            stream.push(DataRow {
                id: next_id,
                features: sample(class, &mut rng),
                label: Some(LabelId(class as u32)),
            });
            next_id += 1;
            produced += 1;
        }
        chunk_index += 1;
    }

    let meta = SyntheticMeta {
        dims: cfg.dims,
        sigma: cfg.sigma,
        separation: cfg.separation,
        seed: cfg.seed,
        chunk_size: cfg.chunk_size,
        seed_labels: (0..cfg.seed_classes as u32).collect(),
        novel_labels: (cfg.seed_classes as u32..total_classes as u32).collect(),
        injections: cfg
            .injections
            .iter()
            .enumerate()
            .map(|(k, &chunk)| ((cfg.seed_classes + k) as u32, chunk))
            .collect(),
        train_rows: train.len(),
        stream_rows: stream.len(),
    };
    Ok(SyntheticData { train, stream, meta })
}

/// Writes `train.csv`, `stream.csv`, and `meta.json` into `dir`.
pub fn write_to_dir(data: &SyntheticData, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_csv(&dir.join("train.csv"), &data.train)?;
    write_csv(&dir.join("stream.csv"), &data.stream)?;
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&data.meta)
        .map_err(|e| CliError::data(format!("cannot serialize metadata: {e}")))?;
    std::fs::write(&meta_path, text + "\n").map_err(|e| CliError::io(meta_path, e))
}

pub fn read_meta(path: &Path) -> Result<SyntheticMeta> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn label_counts(rows: &[DataRow]) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for row in rows {
            *counts.entry(row.label.unwrap().0).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn largest_remainder_matches_hand_examples() {
        assert_eq!(largest_remainder_counts(&[1.0, 1.0, 1.0], 20), vec![7, 7, 6]);
        assert_eq!(
            largest_remainder_counts(&[0.25, 0.25, 0.25, 0.25], 6),
            vec![2, 2, 1, 1]
        );
        assert_eq!(largest_remainder_counts(&[0.5, 0.0, 0.5], 3), vec![2, 0, 1]);
        let counts = largest_remainder_counts(&[0.1, 0.2, 0.7], 100);
        assert_eq!(counts, vec![10, 20, 70]);
        assert_eq!(largest_remainder_counts(&[], 5), Vec::<usize>::new());
    }

    #[test]
    fn default_generation_has_the_expected_shape() {
        let data = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(data.train.len(), 1800);
        assert_eq!(data.stream.len(), 1000);
        assert_eq!(data.meta.seed_labels, vec![0, 1, 2]);
        assert_eq!(data.meta.novel_labels, vec![3, 4]);
        assert_eq!(data.meta.injections, vec![(3, 10), (4, 25)]);
        // ids are unique and contiguous
        let mut ids: Vec<u64> =
            data.train.iter().chain(&data.stream).map(|r| r.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..2800).collect::<Vec<u64>>());
        // train holds only seed classes
        assert!(label_counts(&data.train).keys().all(|&l| l < 3));
    }

    #[test]
    fn chunk_composition_follows_the_injection_schedule() {
        let cfg = SyntheticConfig::default();
        let data = generate(&cfg).unwrap();
        let chunk = |i: usize| &data.stream[i * cfg.chunk_size..(i + 1) * cfg.chunk_size];
        // before any injection: even mix of the three seed classes
        assert_eq!(
            label_counts(chunk(0)),
            BTreeMap::from([(0, 7), (1, 7), (2, 6)])
        );
        // chunk 10: the first novel class takes its quarter
        assert_eq!(
            label_counts(chunk(10)),
            BTreeMap::from([(0, 5), (1, 5), (2, 5), (3, 5)])
        );
        // chunk 25 onward: both novel classes active
        assert_eq!(
            label_counts(chunk(25)),
            BTreeMap::from([(0, 4), (1, 3), (2, 3), (3, 5), (4, 5)])
        );
        // nothing novel leaks in early
        for i in 0..10 {
            assert!(label_counts(chunk(i)).keys().all(|&l| l < 3), "chunk {i}");
        }
        for i in 10..25 {
            assert!(label_counts(chunk(i)).keys().all(|&l| l < 4), "chunk {i}");
        }
    }

    #[test]
    fn neighboring_centers_sit_separation_apart() {
        let centers = class_centers(5, 2, 8.0);
        for i in 0..5 {
            let a = &centers[i];
            let b = &centers[(i + 1) % 5];
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!((d - 8.0).abs() < 1e-9, "adjacent distance {d}");
        }
        // every pairwise distance is at least the separation
        for i in 0..5 {
            for j in i + 1..5 {
                let (a, b) = (&centers[i], &centers[j]);
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                assert!(d >= 8.0 - 1e-9);
            }
        }
        let line = class_centers(3, 1, 4.0);
        assert_eq!(line, vec![vec![0.0], vec![4.0], vec![8.0]]);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig { seed: 42, ..SyntheticConfig::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.stream, b.stream);
        let c = generate(&SyntheticConfig { seed: 43, ..SyntheticConfig::default() }).unwrap();
        assert_ne!(a.stream, c.stream);
    }

    #[test]
    fn bad_configurations_are_rejected() {
        let base = SyntheticConfig::default();
        assert!(generate(&SyntheticConfig { injections: vec![10], ..base.clone() }).is_err());
        assert!(generate(&SyntheticConfig { novel_share: 0.5, ..base.clone() }).is_err());
        assert!(generate(&SyntheticConfig { sigma: 0.0, ..base.clone() }).is_err());
        assert!(generate(&SyntheticConfig { dims: 0, ..base }).is_err());
    }

    #[test]
    fn files_round_trip_through_a_directory() {
        let dir = std::env::temp_dir().join(format!("autolabel-synth-{}", std::process::id()));
        let cfg = SyntheticConfig {
            stream_instances: 60,
            train_per_class: 5,
            ..SyntheticConfig::default()
        };
        let data = generate(&cfg).unwrap();
        write_to_dir(&data, &dir).unwrap();
        let train = crate::data::read_csv(&dir.join("train.csv")).unwrap();
        let stream = crate::data::read_csv(&dir.join("stream.csv")).unwrap();
        let meta = read_meta(&dir.join("meta.json")).unwrap();
        assert_eq!(train, data.train);
        assert_eq!(stream, data.stream);
        assert_eq!(meta, data.meta);
        std::fs::remove_dir_all(&dir).ok();
    }
}

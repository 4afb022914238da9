//! Dataset I/O and the seed/stream split protocol.
//!
//! Datasets are CSV files with the header `id,<feature columns...>,label`:
//! an integer instance id, one f64 column per feature dimension, and a
//! trailing integer class label that may be empty for unlabeled rows.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use autolabel_core::LabelId;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

/// One dataset row: an identified feature vector with an optional label.
#[derive(Clone, Debug, PartialEq)]
pub struct DataRow {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: Option<LabelId>,
}

/// Reads a dataset CSV; every row must have the same dimensionality.
pub fn read_csv(path: &Path) -> Result<Vec<DataRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[headers.len() - 1] != "label" {
        return Err(CliError::data(format!(
            "{}: expected header `id,<features...>,label`, got {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let dim = headers.len() - 2;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let fail = |what: &str, value: &str| {
            CliError::data(format!("{}:{line}: bad {what} {value:?}", path.display()))
        };
        if record.len() != headers.len() {
            return Err(CliError::data(format!(
                "{}:{line}: expected {} fields, got {}",
                path.display(),
                headers.len(),
                record.len()
            )));
        }
        let id: u64 = record[0].parse().map_err(|_| fail("id", &record[0]))?;
        let mut features = Vec::with_capacity(dim);
        for i in 1..=dim {
            let value: f64 = record[i].parse().map_err(|_| fail("feature", &record[i]))?;
            if !value.is_finite() {
                return Err(fail("feature", &record[i]));
            }
            features.push(value);
        }
        let label_field = &record[headers.len() - 1];
        let label = if label_field.is_empty() {
            None
        } else {
            Some(LabelId(label_field.parse().map_err(|_| fail("label", label_field))?))
        };
        rows.push(DataRow { id, features, label });
    }
    Ok(rows)
}

/// Writes a dataset CSV with the canonical `id,f0..,label` header.
pub fn write_csv(path: &Path, rows: &[DataRow]) -> Result<()> {
    let dim = rows.first().map(|r| r.features.len()).unwrap_or(0);
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut header = vec!["id".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    header.push("label".to_string());
    let io_err = |e: csv::Error| CliError::data(format!("{}: {e}", path.display()));
    writer.write_record(&header).map_err(io_err)?;
    for row in rows {
        let mut record = vec![row.id.to_string()];
        record.extend(row.features.iter().map(|v| v.to_string()));
        record.push(row.label.map(|l| l.0.to_string()).unwrap_or_default());
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

/// The `(features, label)` pairs of a fully labeled dataset.
pub fn labeled_pairs(rows: &[DataRow]) -> Result<Vec<(Vec<f64>, LabelId)>> {
    rows.iter()
        .map(|r| match r.label {
            Some(label) => Ok((r.features.clone(), label)),
            None => Err(CliError::data(format!("row {} has no label", r.id))),
        })
        .collect()
}

/// Ground-truth map over the rows that carry a label.
pub fn truth_map(rows: &[DataRow]) -> BTreeMap<u64, LabelId> {
    rows.iter().filter_map(|r| r.label.map(|l| (r.id, l))).collect()
}

/// Sorted distinct labels present in the rows.
pub fn distinct_labels(rows: &[DataRow]) -> BTreeSet<LabelId> {
    rows.iter().filter_map(|r| r.label).collect()
}

/// How to carve a fully labeled dataset into a seed set and a stream.
#[derive(Clone, Copy, Debug)]
pub struct SplitConfig {
    /// Fraction of the classes revealed to the seed set (rounded up).
    pub known_label_fraction: f64,
    /// Target ratio |seed| / |stream|.
    pub labeled_ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { known_label_fraction: 0.2, labeled_ratio: 0.1, seed: 0 }
    }
}

/// Result of a split: which classes are known, the labeled seed rows, and
/// the stream in replay order.
#[derive(Clone, Debug)]
pub struct Split {
    pub seed_labels: Vec<LabelId>,
    pub labeled: Vec<DataRow>,
    pub stream: Vec<DataRow>,
}

/// Splits a fully labeled dataset into a seed set drawn from a random subset
/// of its classes plus a shuffled stream of everything else.
///
/// A seeded shuffle picks `ceil(fraction * C)` of the `C` classes as known;
/// the seed set is `round(n * ratio / (1 + ratio))` rows sampled from the
/// known-class rows. Rows of unknown classes can only appear in the stream.
pub fn split_dataset(rows: &[DataRow], cfg: &SplitConfig) -> Result<Split> {
    if !(0.0..=1.0).contains(&cfg.known_label_fraction) || cfg.known_label_fraction == 0.0 {
        return Err(CliError::config("known_label_fraction must lie in (0, 1]"));
    }
    if cfg.labeled_ratio <= 0.0 {
        return Err(CliError::config("labeled_ratio must be positive"));
    }
    if rows.iter().any(|r| r.label.is_none()) {
        return Err(CliError::data("split needs a fully labeled dataset"));
    }
    let classes: Vec<LabelId> = distinct_labels(rows).into_iter().collect();
    if classes.is_empty() {
        return Err(CliError::data("split needs at least one labeled row"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shuffled_classes = classes.clone();
    shuffled_classes.shuffle(&mut rng);
    let known_count = ((cfg.known_label_fraction * classes.len() as f64).ceil() as usize)
        .clamp(1, classes.len());
    let mut seed_labels: Vec<LabelId> = shuffled_classes[..known_count].to_vec();
    seed_labels.sort_unstable();
    let known: BTreeSet<LabelId> = seed_labels.iter().copied().collect();

    let target =
        (rows.len() as f64 * cfg.labeled_ratio / (1.0 + cfg.labeled_ratio)).round() as usize;
    if target == 0 {
        return Err(CliError::config(format!(
            "labeled_ratio {} keeps no rows for the seed set",
            cfg.labeled_ratio
        )));
    }
    let mut eligible: Vec<usize> = (0..rows.len())
        .filter(|&i| known.contains(&rows[i].label.expect("checked above")))
        .collect();
    if eligible.len() < target {
        return Err(CliError::config(format!(
            "seed set needs {target} rows from the known classes, but only {} rows carry one",
            eligible.len()
        )));
    }
    eligible.shuffle(&mut rng);
    let chosen: BTreeSet<usize> = eligible[..target].iter().copied().collect();

    let labeled: Vec<DataRow> = chosen.iter().map(|&i| rows[i].clone()).collect();
    let mut stream: Vec<DataRow> =
        (0..rows.len()).filter(|i| !chosen.contains(i)).map(|i| rows[i].clone()).collect();
    stream.shuffle(&mut rng);

    Ok(Split { seed_labels, labeled, stream })
}

//! On-disk artifacts of a labeling run: the decision log (JSON lines), the
//! per-chunk trajectory (CSV), the run summary, and the run manifest (JSON).
//!
//! None of these artifacts embed wall-clock information, so a rerun with the
//! same inputs reproduces them byte for byte.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use autolabel_core::{EvalTally, LabelDecision, LabelId, Outcome};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{ChunkStats, RunOutput};

/// One line of the decision log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub instance: u64,
    pub chunk: usize,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub retroactive: bool,
}

impl From<&LabelDecision> for DecisionRecord {
    fn from(d: &LabelDecision) -> Self {
        DecisionRecord {
            instance: d.instance_id,
            chunk: d.chunk,
            status: if d.outcome.is_assigned() { "assigned" } else { "deferred" }.into(),
            label: d.outcome.label().map(|l| l.0),
            score: d.outcome.score(),
            retroactive: d.retroactive,
        }
    }
}

impl DecisionRecord {
    /// Rebuilds the engine-side decision (votes are not logged).
    pub fn to_decision(&self) -> Result<LabelDecision> {
        let outcome = match self.status.as_str() {
            "assigned" => match (self.label, self.score) {
                (Some(label), Some(score)) => Outcome::Assigned { label: LabelId(label), score },
                _ => {
                    return Err(CliError::data(format!(
                        "assigned record for instance {} lacks a label or score",
                        self.instance
                    )))
                }
            },
            "deferred" => Outcome::Deferred,
            other => {
                return Err(CliError::data(format!(
                    "unknown decision status {other:?} for instance {}",
                    self.instance
                )))
            }
        };
        Ok(LabelDecision {
            instance_id: self.instance,
            chunk: self.chunk,
            outcome,
            votes: Vec::new(),
            retroactive: self.retroactive,
        })
    }
}

/// Writes the decision log as JSON lines.
pub fn write_decisions(path: &Path, decisions: &[LabelDecision]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for d in decisions {
        let record = DecisionRecord::from(d);
        let line = serde_json::to_string(&record)
            .map_err(|e| CliError::data(format!("cannot serialize decision: {e}")))?;
        writeln!(out, "{line}").map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a decision log back into engine-side decisions (votes empty).
pub fn read_decisions(path: &Path) -> Result<Vec<LabelDecision>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut decisions = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DecisionRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        decisions.push(record.to_decision()?);
    }
    Ok(decisions)
}

/// Writes the per-chunk trajectory as CSV. Founded labels are joined with
/// `|` so the column stays a single field.
pub fn write_trajectory(path: &Path, stats: &[ChunkStats]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::data(format!("{}: {e}", path.display()));
    writer
        .write_record([
            "chunk",
            "arrived",
            "assigned",
            "deferred",
            "retroactive",
            "founded",
            "total_prototypes",
            "buffer_len",
        ])
        .map_err(io_err)?;
    for s in stats {
        let founded =
            s.founded.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("|");
        writer
            .write_record([
                s.chunk.to_string(),
                s.arrived.to_string(),
                s.assigned.to_string(),
                s.deferred.to_string(),
                s.retroactive.to_string(),
                founded,
                s.total_prototypes.to_string(),
                s.buffer_len.to_string(),
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

/// Final outcome per instance: the last decision wins.
pub fn final_outcomes(decisions: &[LabelDecision]) -> BTreeMap<u64, Outcome> {
    decisions.iter().map(|d| (d.instance_id, d.outcome)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscoveredSummary {
    pub label: u32,
    pub founding_chunk: usize,
}

/// Quality numbers; each rate is absent when its denominator is zero.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsSummary {
    pub evaluated: usize,
    pub correct_new: usize,
    pub correct_existing: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub assigned_new: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miss_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_novel_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<f64>,
}

impl MetricsSummary {
    pub fn from_tally(tally: &EvalTally) -> Self {
        MetricsSummary {
            evaluated: tally.labeled,
            correct_new: tally.correct_new,
            correct_existing: tally.correct_existing,
            false_positives: tally.false_positives,
            false_negatives: tally.false_negatives,
            assigned_new: tally.assigned_new,
            accuracy: tally.accuracy().ok(),
            miss_rate: tally.m_new().ok(),
            false_novel_rate: tally.f_new().ok(),
            f2: tally.f_beta(2.0).ok(),
        }
    }
}

/// The `summary.json` payload.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub train_rows: usize,
    pub stream_rows: usize,
    pub chunks: usize,
    /// Instances whose final outcome assigned a label.
    pub assigned_final: usize,
    /// Instances still deferred when the stream ended.
    pub deferred_final: usize,
    pub retroactive_decisions: usize,
    pub discovered: Vec<DiscoveredSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSummary>,
}

impl RunSummary {
    pub fn build(
        config: &RunConfig,
        output: &RunOutput,
        truth: &BTreeMap<u64, LabelId>,
        train_rows: usize,
        stream_rows: usize,
    ) -> Self {
        let finals = final_outcomes(&output.decisions);
        let assigned_final = finals.values().filter(|o| o.is_assigned()).count();
        let metrics = if truth.is_empty() {
            None
        } else {
            Some(MetricsSummary::from_tally(&output.evaluate(truth)))
        };
        RunSummary {
            config: config.clone(),
            train_rows,
            stream_rows,
            chunks: output.chunk_stats.len(),
            assigned_final,
            deferred_final: finals.len() - assigned_final,
            retroactive_decisions: output.decisions.iter().filter(|d| d.retroactive).count(),
            discovered: output
                .state
                .label_space
                .discovered()
                .iter()
                .map(|d| DiscoveredSummary { label: d.id.0, founding_chunk: d.founding_chunk })
                .collect(),
            metrics,
        }
    }
}

/// The `manifest.json` payload: inputs, parameters, and artifact names of a
/// run, with nothing time-dependent.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub train: String,
    pub stream: String,
    pub out_dir: String,
    pub train_rows: usize,
    pub stream_rows: usize,
    pub seed: u64,
    pub artifacts: Vec<String>,
}

/// Serializes any summary-like value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("cannot serialize {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

//! End-to-end labeling runs: slice a stream into chunks, drive the engine,
//! and keep per-chunk statistics for reporting and invariant checks.

use std::collections::BTreeMap;

use autolabel_core::{
    build_tally, Chunk, EngineState, EvalTally, Instance, LabelDecision, LabelId, StreamConfig,
};

use crate::data::DataRow;
use crate::error::{CliError, Result};

/// What happened while one chunk was processed.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ChunkStats {
    pub chunk: usize,
    pub arrived: usize,
    /// Fresh (non-retroactive) decisions that assigned a label.
    pub assigned: usize,
    /// Fresh decisions that deferred to the novelty buffer.
    pub deferred: usize,
    /// Retroactive decisions emitted while this chunk was processed.
    pub retroactive: usize,
    /// Labels founded during this chunk.
    pub founded: Vec<u32>,
    /// Ensemble-wide prototype count after the chunk.
    pub total_prototypes: usize,
    /// Novelty-buffer occupancy after the chunk.
    pub buffer_len: usize,
}

/// Everything a finished run hands back.
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// All decisions in emission order, retroactive ones included.
    pub decisions: Vec<LabelDecision>,
    pub chunk_stats: Vec<ChunkStats>,
    pub state: EngineState,
}

impl RunOutput {
    /// Labels discovered over the whole run, in founding order.
    pub fn discovered_labels(&self) -> Vec<u32> {
        self.state.label_space.discovered().iter().map(|d| d.id.0).collect()
    }

    /// Evaluation tally against ground truth (rows without truth are skipped).
    pub fn evaluate(&self, truth: &BTreeMap<u64, LabelId>) -> EvalTally {
        build_tally(&self.decisions, truth, &self.state.label_space)
    }
}

/// Runs the engine over `stream`, `chunk_size` instances at a time.
pub fn run_stream(
    labeled: &[(Vec<f64>, LabelId)],
    stream: &[DataRow],
    cfg: &StreamConfig,
    chunk_size: usize,
) -> Result<RunOutput> {
    if chunk_size == 0 {
        return Err(CliError::config("chunk_size must be at least 1"));
    }
    if stream.is_empty() {
        return Err(CliError::data("the stream is empty"));
    }
    let mut state = EngineState::new(labeled, cfg)?;
    let mut decisions = Vec::with_capacity(stream.len());
    let mut chunk_stats = Vec::new();

    for (index, rows) in stream.chunks(chunk_size).enumerate() {
        let instances: Vec<Instance> = rows
            .iter()
            .enumerate()
            .map(|(j, r)| Instance::new(r.id, r.features.clone(), r.label, index * chunk_size + j))
            .collect();
        let chunk = Chunk { index, instances };
        let discovered_before = state.label_space.discovered().len();
        let fresh = state.process_chunk(&chunk, cfg)?;

        let founded: Vec<u32> = state.label_space.discovered()[discovered_before..]
            .iter()
            .map(|d| d.id.0)
            .collect();
        let retroactive = fresh.iter().filter(|d| d.retroactive).count();
        let assigned =
            fresh.iter().filter(|d| !d.retroactive && d.outcome.is_assigned()).count();
        let deferred = fresh.len() - retroactive - assigned;
        chunk_stats.push(ChunkStats {
            chunk: index,
            arrived: rows.len(),
            assigned,
            deferred,
            retroactive,
            founded,
            total_prototypes: state.total_prototypes(),
            buffer_len: state.buffer.len(),
        });
        decisions.extend(fresh);
    }

    Ok(RunOutput { decisions, chunk_stats, state })
}

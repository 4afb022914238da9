//! The `autolabel` command set: argument definitions and the code behind
//! each subcommand.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use autolabel_core::{LabelId, LabelSpace};
use autolabel_sim::{default_scenario, simulate, Scenario, SimReport, Strategy};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::data;
use crate::error::{CliError, Result};
use crate::logfmt::{self, MetricsSummary, RunManifest, RunSummary};
use crate::pipeline;
use crate::synthetic::{self, SyntheticConfig};

#[derive(Debug, Parser)]
#[command(
    name = "autolabel",
    version,
    about = "Self-adapting stream auto-labeling engine with a mobile-processor workload simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label a stream with an ensemble trained on a labeled seed set
    Label(LabelArgs),
    /// Replay the labeling workload on a heterogeneous-processor model
    Simulate(SimulateArgs),
    /// Rerun labeling across the values of one parameter and compare
    Sweep(SweepArgs),
    /// Generate a synthetic blob stream with scheduled novel classes
    GenSynthetic(GenSyntheticArgs),
    /// Score an existing decision log against ground truth
    Score(ScoreArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Label(args) => run_label(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Sweep(args) => run_sweep(&args),
        Command::GenSynthetic(args) => run_gen_synthetic(&args),
        Command::Score(args) => run_score(&args),
    }
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Labeled training CSV (id,<features...>,label)
    #[arg(long)]
    pub train: PathBuf,
    /// Stream CSV; labels, when present, are used only for evaluation
    #[arg(long)]
    pub stream: PathBuf,
    /// Directory for decisions.jsonl, trajectory.csv, summary.json, manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML run configuration (flags below override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    #[arg(long)]
    pub num_hf: Option<usize>,
    #[arg(long)]
    pub k_per_hf: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl LabelArgs {
    pub fn effective_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.chunk_size {
            cfg.chunk_size = v;
        }
        if let Some(v) = self.num_hf {
            cfg.num_hf = v;
        }
        if let Some(v) = self.k_per_hf {
            cfg.k_per_hf = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_label(args: &LabelArgs) -> Result<()> {
    let cfg = args.effective_config()?;
    let train_rows = data::read_csv(&args.train)?;
    let stream_rows = data::read_csv(&args.stream)?;
    if train_rows.is_empty() {
        return Err(CliError::data(format!("{}: no training rows", args.train.display())));
    }
    let labeled = data::labeled_pairs(&train_rows)?;
    let output = pipeline::run_stream(&labeled, &stream_rows, &cfg.stream_config(), cfg.chunk_size)?;
    let truth = data::truth_map(&stream_rows);

    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    logfmt::write_decisions(&args.out_dir.join("decisions.jsonl"), &output.decisions)?;
    logfmt::write_trajectory(&args.out_dir.join("trajectory.csv"), &output.chunk_stats)?;
    let summary = RunSummary::build(&cfg, &output, &truth, train_rows.len(), stream_rows.len());
    logfmt::write_json(&args.out_dir.join("summary.json"), &summary)?;
    let manifest = RunManifest {
        command: "label".into(),
        train: args.train.display().to_string(),
        stream: args.stream.display().to_string(),
        out_dir: args.out_dir.display().to_string(),
        train_rows: train_rows.len(),
        stream_rows: stream_rows.len(),
        seed: cfg.seed,
        artifacts: vec![
            "decisions.jsonl".into(),
            "trajectory.csv".into(),
            "summary.json".into(),
            "manifest.json".into(),
        ],
    };
    logfmt::write_json(&args.out_dir.join("manifest.json"), &manifest)?;

    println!(
        "labeled {} instances in {} chunks: {} assigned, {} still deferred, {} retroactive decisions",
        summary.stream_rows,
        summary.chunks,
        summary.assigned_final,
        summary.deferred_final,
        summary.retroactive_decisions
    );
    if summary.discovered.is_empty() {
        println!("no new labels were founded");
    } else {
        let list: Vec<String> = summary
            .discovered
            .iter()
            .map(|d| format!("{} (chunk {})", d.label, d.founding_chunk))
            .collect();
        println!("founded labels: {}", list.join(", "));
    }
    if let Some(metrics) = &summary.metrics {
        println!("{}", format_metrics(metrics));
    }
    println!("artifacts written to {}", args.out_dir.display());
    Ok(())
}

fn format_metrics(m: &MetricsSummary) -> String {
    let pct = |v: Option<f64>| match v {
        Some(v) => format!("{v:.2}%"),
        None => "n/a".into(),
    };
    let f2 = match m.f2 {
        Some(v) => format!("{v:.4}"),
        None => "n/a".into(),
    };
    format!(
        "evaluated {}: accuracy {}, miss-rate {}, false-novel {}, F2 {}",
        m.evaluated,
        pct(m.accuracy),
        pct(m.miss_rate),
        pct(m.false_novel_rate),
        f2
    )
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Pipeline steps to synthesize when no scenario file is given
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Scenario TOML describing kernels, loads, and hardware
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Write the built-in scenario to this path and exit
    #[arg(long)]
    pub dump_scenario: Option<PathBuf>,
    /// Strategies to run: ladder indices or names (default: all six)
    #[arg(long, value_delimiter = ',')]
    pub strategies: Vec<String>,
    /// Write the full reports as JSON to this path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    if let Some(path) = &args.dump_scenario {
        default_scenario(args.steps).save(path)?;
        println!("wrote the built-in {}-step scenario to {}", args.steps, path.display());
        return Ok(());
    }
    let scenario = match &args.scenario {
        Some(path) => Scenario::load(path)?,
        None => default_scenario(args.steps),
    };
    let (workloads, hardware) = scenario.build()?;
    let strategies: Vec<Strategy> = if args.strategies.is_empty() {
        Strategy::ALL.to_vec()
    } else {
        args.strategies.iter().map(|s| s.parse()).collect::<autolabel_sim::Result<_>>()?
    };

    let reports: Vec<SimReport> = strategies
        .iter()
        .map(|&s| simulate(&workloads, &hardware, s))
        .collect::<autolabel_sim::Result<_>>()?;

    println!(
        "{:<20} {:>12} {:>10} {:>12}",
        "strategy", "total-time", "speedup", "energy"
    );
    for r in &reports {
        println!(
            "{:<20} {:>12.4} {:>10.3} {:>12.3}",
            r.strategy.to_string(),
            r.total_time,
            r.speedup_vs_baseline,
            r.energy
        );
    }
    if let Some(path) = &args.out {
        logfmt::write_json(path, &reports)?;
        println!("reports written to {}", path.display());
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    NumHf,
    Tau,
    ChunkSize,
    KPerHf,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::NumHf => "num_hf",
            SweepAxis::Tau => "tau",
            SweepAxis::ChunkSize => "chunk_size",
            SweepAxis::KPerHf => "k_per_hf",
        }
    }

    fn apply(self, cfg: &mut RunConfig, value: &str) -> Result<()> {
        let bad = |v: &str| CliError::config(format!("bad {} value {v:?}", self.name()));
        match self {
            SweepAxis::Tau => cfg.tau = value.parse().map_err(|_| bad(value))?,
            SweepAxis::NumHf => cfg.num_hf = value.parse().map_err(|_| bad(value))?,
            SweepAxis::ChunkSize => cfg.chunk_size = value.parse().map_err(|_| bad(value))?,
            SweepAxis::KPerHf => cfg.k_per_hf = value.parse().map_err(|_| bad(value))?,
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Which parameter to vary
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated values for the chosen axis
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long)]
    pub train: PathBuf,
    /// Stream CSV; must carry ground-truth labels
    #[arg(long)]
    pub stream: PathBuf,
    /// Output CSV: axis,value,accuracy,assigned,wall_seconds
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let base = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let train_rows = data::read_csv(&args.train)?;
    let stream_rows = data::read_csv(&args.stream)?;
    let labeled = data::labeled_pairs(&train_rows)?;
    let truth = data::truth_map(&stream_rows);
    if truth.is_empty() {
        return Err(CliError::data("sweep needs ground-truth labels in the stream CSV"));
    }

    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| CliError::data(format!("{}: {e}", args.out.display())))?;
    let io_err = |e: csv::Error| CliError::data(format!("cannot write sweep row: {e}"));
    writer
        .write_record(["axis", "value", "accuracy", "assigned", "wall_seconds"])
        .map_err(io_err)?;
    println!("{:<12} {:>10} {:>10} {:>10} {:>14}", "axis", "value", "accuracy", "assigned", "wall_seconds");
    for value in &args.values {
        let mut cfg = base.clone();
        args.axis.apply(&mut cfg, value)?;
        cfg.validate()?;
        let started = Instant::now();
        let output =
            pipeline::run_stream(&labeled, &stream_rows, &cfg.stream_config(), cfg.chunk_size)?;
        let wall = started.elapsed().as_secs_f64();
        let assigned =
            logfmt::final_outcomes(&output.decisions).values().filter(|o| o.is_assigned()).count();
        let accuracy = output.evaluate(&truth).accuracy().ok();
        let accuracy_text = accuracy.map(|a| format!("{a:.4}")).unwrap_or_default();
        writer
            .write_record([
                args.axis.name().to_string(),
                value.clone(),
                accuracy_text.clone(),
                assigned.to_string(),
                format!("{wall:.3}"),
            ])
            .map_err(io_err)?;
        println!(
            "{:<12} {:>10} {:>10} {:>10} {:>14.3}",
            args.axis.name(),
            value,
            if accuracy_text.is_empty() { "n/a" } else { &accuracy_text },
            assigned,
            wall
        );
    }
    writer.flush().map_err(|e| CliError::io(&args.out, e))?;
    println!("sweep written to {}", args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    /// Directory for train.csv, stream.csv, and meta.json
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[arg(long, default_value_t = 3)]
    pub seed_classes: usize,
    #[arg(long, default_value_t = 2)]
    pub novel_classes: usize,
    /// Comma-separated injection chunk per novel class
    #[arg(long, value_delimiter = ',')]
    pub injections: Option<Vec<usize>>,
    #[arg(long, default_value_t = 600)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 1000)]
    pub stream_instances: usize,
    #[arg(long, default_value_t = 20)]
    pub chunk_size: usize,
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.25)]
    pub novel_share: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn run_gen_synthetic(args: &GenSyntheticArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        dims: args.dims,
        seed_classes: args.seed_classes,
        novel_classes: args.novel_classes,
        injections: args
            .injections
            .clone()
            .unwrap_or_else(|| SyntheticConfig::default().injections),
        train_per_class: args.train_per_class,
        stream_instances: args.stream_instances,
        chunk_size: args.chunk_size,
        separation: args.separation,
        sigma: args.sigma,
        novel_share: args.novel_share,
        seed: args.seed,
    };
    let data = synthetic::generate(&cfg)?;
    synthetic::write_to_dir(&data, &args.out_dir)?;
    println!(
        "generated {} training rows ({} classes) and {} stream rows into {}",
        data.train.len(),
        args.seed_classes,
        data.stream.len(),
        args.out_dir.display()
    );
    for (label, chunk) in &data.meta.injections {
        println!("novel class {label} enters at chunk {chunk}");
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Decision log produced by `label` (JSON lines)
    #[arg(long)]
    pub decisions: PathBuf,
    /// CSV with ground-truth labels for the streamed instances
    #[arg(long)]
    pub truth: PathBuf,
    /// Training CSV whose labels define the seed classes
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Synthetic metadata JSON naming the seed classes
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Beta for the F-score (recall weight on the novel class)
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
}

/// Rebuilds the label space a decision log implies: the given seed labels
/// plus every assigned label above them, which must be a dense run of ids
/// (the engine founds labels densely upward).
fn reconstruct_label_space(
    decisions: &[autolabel_core::LabelDecision],
    seed_labels: &BTreeSet<LabelId>,
) -> Result<LabelSpace> {
    let mut space = LabelSpace::from_seed(seed_labels.iter().copied());
    let mut extra: BTreeSet<LabelId> = decisions
        .iter()
        .filter_map(|d| d.outcome.label())
        .filter(|l| !seed_labels.contains(l))
        .collect();
    while !extra.is_empty() {
        let next = space.next_id();
        if !extra.remove(&next) {
            let orphan = extra.iter().next().expect("non-empty");
            return Err(CliError::data(format!(
                "decision log assigns label {} that the seed classes cannot explain",
                orphan.0
            )));
        }
        space.allocate(0);
    }
    Ok(space)
}

fn run_score(args: &ScoreArgs) -> Result<()> {
    let decisions = logfmt::read_decisions(&args.decisions)?;
    let truth_rows = data::read_csv(&args.truth)?;
    let truth = data::truth_map(&truth_rows);
    if truth.is_empty() {
        return Err(CliError::data(format!("{}: no labeled rows", args.truth.display())));
    }
    let seed_labels: BTreeSet<LabelId> = match (&args.train, &args.meta) {
        (Some(train), _) => data::distinct_labels(&data::read_csv(train)?),
        (None, Some(meta)) => synthetic::read_meta(meta)?
            .seed_labels
            .iter()
            .map(|&l| LabelId(l))
            .collect(),
        (None, None) => {
            return Err(CliError::config(
                "score needs --train or --meta to know the seed classes",
            ))
        }
    };
    if seed_labels.is_empty() {
        return Err(CliError::data("the seed class set is empty"));
    }
    let space = reconstruct_label_space(&decisions, &seed_labels)?;
    let tally = autolabel_core::build_tally(&decisions, &truth, &space);

    #[derive(serde::Serialize)]
    struct ScoreOutput {
        evaluated: usize,
        correct_new: usize,
        correct_existing: usize,
        false_positives: usize,
        false_negatives: usize,
        assigned_new: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        accuracy: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        miss_rate: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        false_novel_rate: Option<f64>,
        beta: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        f_score: Option<f64>,
    }
    let out = ScoreOutput {
        evaluated: tally.labeled,
        correct_new: tally.correct_new,
        correct_existing: tally.correct_existing,
        false_positives: tally.false_positives,
        false_negatives: tally.false_negatives,
        assigned_new: tally.assigned_new,
        accuracy: tally.accuracy().ok(),
        miss_rate: tally.m_new().ok(),
        false_novel_rate: tally.f_new().ok(),
        beta: args.beta,
        f_score: tally.f_beta(args.beta).ok(),
    };
    let text = serde_json::to_string_pretty(&out)
        .map_err(|e| CliError::data(format!("cannot serialize score: {e}")))?;
    println!("{text}");
    Ok(())
}

/// Shared helper for tests and the binary: absolute path inside a directory.
pub fn artifact_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

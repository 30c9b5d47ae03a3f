//! The `visworld` command line.
//!
//! Exit codes: 0 success, 1 validation (including failed certificates),
//! 2 generation failure, 3 I/O.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::cot::dataset::{self, read_records, DatasetConfig, Record};
use crate::cot::{build_cot, input_states, render, CotError, CotSegment, StateView, WmFormat};
use crate::envs::{self, CountMode, EnvError, Params, Split, Task, TaskInstance};
use crate::eval::{self, EvalError};
use crate::theory::{corollary_ensemble, kl_ensemble, mi_ensemble, transfer_ensemble, EnsembleReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Generation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Generation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CotError> for CliError {
    fn from(e: CotError) -> Self {
        match e {
            CotError::Env(e @ EnvError::Generation { .. }) => CliError::Generation(e.to_string()),
            CotError::Io(e) => CliError::Io(e.to_string()),
            CotError::Json(e) => CliError::Io(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(e) => CliError::Io(e.to_string()),
            EvalError::Cot(e) => e.into(),
            e => CliError::Validation(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "visworld", version, about = "Task worlds, CoT datasets, scoring and certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset split with rendered images and a manifest.
    Generate(GenerateArgs),
    /// Score a predictions file against a generated dataset.
    Evaluate(EvaluateArgs),
    /// Run the seeded certificate ensembles.
    Theory(TheoryArgs),
    /// Write a PNG for every state of one instance.
    Render(RenderArgs),
    /// Print one instance in readable form.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutArg {
    /// Output root; defaults to $VISWORLD_OUT, then ./visworld_out.
    #[arg(long, env = "VISWORLD_OUT", default_value = "visworld_out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ParamArgs {
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub objects: Option<usize>,
    #[arg(long)]
    pub operations: Option<usize>,
    #[arg(long)]
    pub holes: Option<usize>,
    #[arg(long)]
    pub stack_size: Option<usize>,
    #[arg(long, value_enum)]
    pub count_mode: Option<CountModeArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CountModeArg {
    Possible,
    AllPossible,
}

impl ParamArgs {
    pub fn params(&self) -> Params {
        Params {
            grid_size: self.grid_size,
            folds: self.folds,
            objects: self.objects,
            operations: self.operations,
            holes: self.holes,
            stack_size: self.stack_size,
            count_mode: self.count_mode.map(|m| match m {
                CountModeArg::Possible => CountMode::Possible,
                CountModeArg::AllPossible => CountMode::AllPossible,
            }),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Task name, or `all`.
    #[arg(long, default_value = "all")]
    pub task: String,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Instances per task; defaults to the reference test-split size.
    #[arg(long)]
    pub count: Option<usize>,
    /// World-model formats, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "implicit,verbal,visual")]
    pub wm: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub resolution: u32,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Dataset root (holding manifest.json); defaults to the output root.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub predictions: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Kl,
    Mi,
    Corollary,
    Transfer,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct TheoryArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub check: Check,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

/// Where an instance comes from: a record in a JSONL file (or dataset root),
/// or a fresh generation.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// JSONL file of records, or a dataset root.
    #[arg(long, requires = "id", conflicts_with = "task")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub id: Option<String>,
    /// Generate instead: task name.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instance index under `--seed`.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 256)]
    pub resolution: u32,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Format whose trace is shown.
    #[arg(long, default_value = "visual")]
    pub wm: String,
}

fn validation<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn parse_tasks(s: &str) -> Result<Vec<Task>> {
    if s == "all" {
        return Ok(Task::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse().map_err(validation)).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<String> {
    let tasks = parse_tasks(&args.task)?;
    let split: Split = args.split.parse().map_err(validation)?;
    let formats: Vec<WmFormat> = args.wm.iter().map(|f| f.parse().map_err(validation)).collect::<Result<_>>()?;
    if args.count == Some(0) {
        return Err(CliError::Validation("--count must be positive".into()));
    }
    let mut manifest = None;
    // One config per task, so a missing --count can default per task.
    for task in tasks {
        let cfg = DatasetConfig {
            out_dir: args.out.out.clone(),
            tasks: vec![task],
            split,
            count: args.count.unwrap_or(task.test_target()),
            formats: formats.clone(),
            master_seed: args.seed,
            resolution: args.resolution,
            params: args.params.params(),
        };
        manifest = Some(dataset::write_dataset(&cfg)?);
    }
    let m = manifest.expect("at least one task");
    let mut out = String::new();
    for (key, e) in &m.entries {
        out += &format!("{key}: {} records -> {}\n", e.count, e.path);
    }
    out += &format!("manifest digest {} ({} files)\n", m.digest, m.files);
    Ok(out)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let root = args.data.clone().unwrap_or_else(|| args.out.out.clone());
    if !args.predictions.exists() {
        return Err(CliError::Io(format!("{}: no such file", args.predictions.display())));
    }
    let predictions = eval::read_predictions(&args.predictions)?;
    let records = eval::load_instances(&root)?;
    let report = eval::build_report(&records, &predictions, &root)?;
    let path = args.out.out.join("reports/eval.json");
    write_json(&path, &report)?;
    Ok(format!("{}report written to {}\n", report.table(), path.display()))
}

fn ensemble(check: Check, seed: u64, trials: usize) -> EnsembleReport {
    match check {
        Check::Kl => kl_ensemble(seed, trials),
        Check::Mi => mi_ensemble(seed, trials),
        Check::Corollary => corollary_ensemble(seed, trials),
        Check::Transfer => transfer_ensemble(seed, trials),
        Check::All => unreachable!("expanded by the caller"),
    }
}

/// Runs the requested ensembles; the returned flag is whether all passed.
pub fn cmd_theory(args: &TheoryArgs) -> Result<(String, bool)> {
    if args.trials == 0 {
        return Err(CliError::Validation("--trials must be positive".into()));
    }
    let checks = match args.check {
        Check::All => vec![Check::Kl, Check::Mi, Check::Corollary, Check::Transfer],
        c => vec![c],
    };
    let reports: Vec<EnsembleReport> = checks.iter().map(|&c| ensemble(c, args.seed, args.trials)).collect();
    let mut out = String::new();
    for r in &reports {
        let worst = r
            .worst_slack
            .iter()
            .map(|(k, v)| format!("{k}={v:.3e}"))
            .collect::<Vec<_>>()
            .join(" ");
        out += &format!(
            "{:<10} {} trials {}{}  worst slack: {worst}\n",
            r.check,
            r.trials,
            if r.passed { "PASS" } else { "FAIL" },
            if r.partial { " (partial)" } else { "" }
        );
        for f in r.failures().take(5) {
            out += &format!("  instance {} seed {:#x}: {}\n", f.index, f.seed, f.error.as_deref().unwrap_or("gap violated"));
        }
    }
    let name = match args.check {
        Check::All => "all",
        _ => &reports[0].check,
    };
    let path = args.out.out.join(format!("reports/theory_{name}.json"));
    let body: serde_json::Map<String, serde_json::Value> = reports
        .iter()
        .map(|r| Ok((r.check.clone(), serde_json::to_value(r)?)))
        .collect::<Result<_>>()?;
    write_json(&path, &body)?;
    out += &format!("report written to {}\n", path.display());
    Ok((out, reports.iter().all(|r| r.passed)))
}

fn find_record(path: &Path, id: &str) -> Result<Record> {
    if !path.exists() {
        return Err(CliError::Io(format!("{}: no such file", path.display())));
    }
    let records = if path.is_dir() { eval::load_instances(path)? } else { read_records(path)? };
    records
        .into_iter()
        .find(|r| r.id == id)
        .ok_or_else(|| CliError::Validation(format!("no instance '{id}' in {}", path.display())))
}

fn load_source(src: &SourceArgs) -> Result<TaskInstance> {
    if let Some(path) = &src.data {
        let id = src.id.as_deref().expect("clap requires --id");
        return Ok(eval::instance_of(&find_record(path, id)?));
    }
    let Some(task) = &src.task else {
        return Err(CliError::Validation("give --data and --id, or --task".into()));
    };
    let task: Task = task.parse().map_err(validation)?;
    let split: Split = src.split.parse().map_err(validation)?;
    let seed = dataset::instance_seed(src.seed, task, split, src.index);
    envs::generate(task, split, seed, &src.params.params()).map_err(|e| match e {
        e @ EnvError::Generation { .. } => CliError::Generation(e.to_string()),
        e => CliError::Generation(format!("{task} seed {seed:#x}: {e}")),
    })
}

pub fn cmd_render(args: &RenderArgs) -> Result<String> {
    let inst = load_source(&args.source)?;
    let dir = args.out.out.join("render").join(&inst.id);
    fs::create_dir_all(&dir)?;
    let mut states: Vec<(String, StateView)> = input_states(&inst.world)?
        .into_iter()
        .enumerate()
        .map(|(k, s)| (format!("input_{k}"), s))
        .collect();
    for (k, s) in build_cot(&inst, WmFormat::Visual)?.images.into_iter().enumerate() {
        states.push((format!("step_{k}"), s));
    }
    let mut out = String::new();
    for (name, s) in &states {
        let path = dir.join(format!("{name}.png"));
        fs::write(&path, render(s, args.resolution)?.to_png()?)?;
        out += &format!("{}\n", path.display());
    }
    Ok(out)
}

fn segment_kind(s: &CotSegment) -> &'static str {
    match s {
        CotSegment::Text(_) => "text",
        CotSegment::ImageRef(_) => "image_ref",
        CotSegment::VerbalMatrix(_) => "verbal_matrix",
        CotSegment::MaskedPoint(_) => "masked_point",
    }
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<String> {
    let inst = load_source(&args.source)?;
    let format: WmFormat = args.wm.parse().map_err(validation)?;
    let built = build_cot(&inst, format)?;
    let kinds: Vec<&str> = built.trace.segments.iter().map(segment_kind).collect();
    let mut counts = std::collections::BTreeMap::new();
    for k in &kinds {
        *counts.entry(*k).or_insert(0usize) += 1;
    }
    let mut out = format!("id: {}\ntask: {}\nsplit: {}\nseed: {:#x}\n", inst.id, inst.task, inst.split, inst.seed);
    out += &format!("params: {}\n", inst.params.stratum());
    out += &format!("question: {}\n", inst.question);
    out += &format!("answer: {}\n", inst.answer);
    out += &format!("format: {format}\nsegments: {}\n", kinds.join(" "));
    out += &format!(
        "segment counts: {}\n",
        counts.iter().map(|(k, n)| format!("{k}={n}")).collect::<Vec<_>>().join(", ")
    );
    out += &format!("trace:\n{}", built.trace.text());
    Ok(out)
}

/// Runs a parsed command; `Ok(false)` means a certificate failed.
pub fn run(cli: &Cli) -> Result<(String, bool)> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|s| (s, true)),
        Command::Evaluate(a) => cmd_evaluate(a).map(|s| (s, true)),
        Command::Theory(a) => cmd_theory(a),
        Command::Render(a) => cmd_render(a).map(|s| (s, true)),
        Command::Inspect(a) => cmd_inspect(a).map(|s| (s, true)),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, ok)) => {
            print!("{out}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

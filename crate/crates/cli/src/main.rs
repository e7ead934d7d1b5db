use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use stateval_core::config::Config;
use stateval_core::dataset::a11y::{adapter_by_name, annotate_state};
use stateval_core::dataset::backend::{
    CompletionBackend, HttpBackend, RecordingBackend, ReplayBackend, RetryingBackend, ENV_CONCURRENCY, ENV_TRANSCRIPT,
};
use stateval_core::dataset::expand::expand_dataset;
use stateval_core::dataset::filter::{classify_tasks, filter_dataset};
use stateval_core::dataset::format::{predictions_to_jsonl, Dataset, FormatError};
use stateval_core::dataset::ingest::{ingest, parse_raw_episodes};
use stateval_core::dataset::tree::{build_trajectory_tree, merge_states, MergeKey};
use stateval_core::dataset::{MockBackend, PromptClient};
use stateval_core::harness::{
    load_predictions, resolve_predictions, run_batch, Adapter, BatchOptions, HarnessError, HttpAdapter, PredictionCache,
    ReplayAdapter, StdioAdapter,
};
use stateval_core::metrics::{aggregate, MetricsError};
use stateval_core::model::{validate_state_group, ViolationKind};
use stateval_core::report::{parse_summaries, ReportBundle};
use stateval_core::{CoordinateSpace, Dimension};

#[derive(Parser)]
#[command(name = "stateval", version, about = "State-level evaluation of GUI agents")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic component (the mock generator in particular).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate raw episodes (accessibility trees plus actions) into a dataset.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "canonical")]
        tree_format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotate standalone screens into a dataset of states.
    Annotate {
        /// JSONL of {"state_id", "screenshot_ref", "accessibility_tree"}.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "canonical")]
        tree_format: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate instructions for every state.
    Expand {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        dimension: DimArg,
        #[command(flatten)]
        generator: GeneratorArgs,
        /// Where to write per-slot generation issues (JSONL).
        #[arg(long)]
        issues: Option<PathBuf>,
    },
    /// Drop instructions that fail the consistency checks.
    Filter {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        generator: GeneratorArgs,
        /// Where to write one audit record per instruction (JSONL).
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Assign a task category to every episode and its states.
    Classify {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Build the trajectory tree of a dataset.
    Tree {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Merge states with equal screenshot (`screenshot`) or widget layout (`layout`).
        #[arg(long)]
        merge_key: Option<MergeKey>,
        /// Also write the dataset with merged states.
        #[arg(long)]
        merged_dataset: Option<PathBuf>,
    },
    /// Judge predictions and write the summary and report files.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Predictions JSONL; defaults to the prediction records in the dataset.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, value_enum)]
        dimension: SingleDim,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        challenging_k: Option<usize>,
    },
    /// Re-render report files from summary files.
    Report {
        #[arg(long, required = true)]
        summary: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long)]
        challenging_k: Option<usize>,
    },
    /// Query an agent for every instruction and write its predictions.
    RunAdapter {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        dimension: SingleDim,
        #[arg(long)]
        out: PathBuf,
        /// Adapter command, run through `sh -c`, speaking the protocol on stdio.
        #[arg(long, group = "agent")]
        command: Option<String>,
        /// Adapter HTTP endpoint.
        #[arg(long, group = "agent")]
        url: Option<String>,
        /// Answer with the gold actions (sanity check of the pipeline).
        #[arg(long, group = "agent")]
        replay: bool,
        /// Reuse and extend this prediction cache.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Agent id for cache-only runs (no adapter given).
        #[arg(long)]
        agent_id: Option<String>,
        /// Directory screenshot references are relative to.
        #[arg(long)]
        image_root: Option<PathBuf>,
        #[arg(long)]
        concurrency: Option<usize>,
        #[arg(long)]
        timeout_s: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DimArg {
    Mwam,
    Uwiu,
    Both,
}

impl DimArg {
    fn dims(self) -> Vec<Dimension> {
        match self {
            DimArg::Mwam => vec![Dimension::Mwam],
            DimArg::Uwiu => vec![Dimension::Uwiu],
            DimArg::Both => vec![Dimension::Mwam, Dimension::Uwiu],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SingleDim {
    Mwam,
    Uwiu,
}

impl From<SingleDim> for Dimension {
    fn from(d: SingleDim) -> Self {
        match d {
            SingleDim::Mwam => Dimension::Mwam,
            SingleDim::Uwiu => Dimension::Uwiu,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorKind {
    /// Deterministic offline generator driven by --seed.
    Mock,
    /// OpenAI-compatible endpoint from the STATEVAL_GENERATOR_* variables.
    Http,
    /// Answers only from a recorded transcript.
    Replay,
}

#[derive(Args)]
struct GeneratorArgs {
    #[arg(long, value_enum, default_value = "mock")]
    generator: GeneratorKind,
    /// Transcript to record to (mock, http) or replay from (replay).
    /// Defaults to $STATEVAL_TRANSCRIPT.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Concurrent generator calls; defaults to $STATEVAL_GENERATOR_CONCURRENCY or the config.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Screenshots are attached to http requests when found under this directory.
    #[arg(long)]
    image_root: Option<PathBuf>,
}

#[derive(Args)]
struct SpaceArg {
    /// Coordinates in agent answers are pixels of a WIDTHxHEIGHT screen
    /// (default: normalized to [0, 1]).
    #[arg(long, value_name = "WIDTHxHEIGHT")]
    pixels: Option<String>,
}

impl SpaceArg {
    fn space(&self) -> Result<CoordinateSpace> {
        let Some(p) = &self.pixels else { return Ok(CoordinateSpace::Normalized) };
        let (w, h) = p.split_once(['x', 'X']).context("--pixels expects WIDTHxHEIGHT")?;
        Ok(CoordinateSpace::Pixels { width: w.trim().parse()?, height: h.trim().parse()? })
    }
}

type Client = PromptClient<RecordingBackend<Box<dyn CompletionBackend>>>;

struct Generator {
    client: Client,
    record_to: Option<PathBuf>,
    concurrency: usize,
}

impl Generator {
    fn new(args: &GeneratorArgs, cfg: &Config, seed: u64) -> Result<Self> {
        let transcript = args.transcript.clone().or_else(|| std::env::var_os(ENV_TRANSCRIPT).map(PathBuf::from));
        let p = &cfg.pipeline;
        let backend: Box<dyn CompletionBackend> = match args.generator {
            GeneratorKind::Mock => Box::new(MockBackend::new(seed).with_rejection(p.mock_reject_low_high, p.mock_reject_action_low)),
            GeneratorKind::Http => {
                let mut http = HttpBackend::from_env(Duration::from_secs(p.timeout_s))?;
                if let Some(root) = &args.image_root {
                    http = http.with_image_root(root);
                }
                Box::new(RetryingBackend::new(http, p.retries, Duration::from_millis(p.retry_base_ms)))
            }
            GeneratorKind::Replay => {
                let path = transcript.as_ref().context("--generator replay needs --transcript")?;
                let replay = ReplayBackend::load(path)?;
                log::info!("replaying {} recorded completions from {}", replay.len(), path.display());
                Box::new(replay)
            }
        };
        let env_concurrency = std::env::var(ENV_CONCURRENCY).ok().and_then(|v| v.parse().ok());
        Ok(Generator {
            client: PromptClient::new(RecordingBackend::new(backend)),
            record_to: if args.generator == GeneratorKind::Replay { None } else { transcript },
            concurrency: args.concurrency.or(env_concurrency).unwrap_or(p.expansion.concurrency).max(1),
        })
    }

    fn finish(&self) -> Result<()> {
        if let Some(path) = &self.record_to {
            self.client.backend().save(path).with_context(|| format!("writing transcript {}", path.display()))?;
        }
        Ok(())
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => Config::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let seed = cfg.seed.unwrap_or(0);
    match cli.command {
        Command::Ingest { input, tree_format, out } => {
            let adapter = adapter_by_name(&tree_format).with_context(|| format!("unknown tree format `{tree_format}`"))?;
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let ds = ingest(&parse_raw_episodes(&text)?, adapter)?;
            ds.save(&out)?;
            log::info!("ingested {} episodes, {} states", ds.episodes.len(), ds.states.len());
        }
        Command::Annotate { input, tree_format, out } => {
            #[derive(serde::Deserialize)]
            struct Screen {
                state_id: String,
                screenshot_ref: String,
                accessibility_tree: serde_json::Value,
            }
            let adapter = adapter_by_name(&tree_format).with_context(|| format!("unknown tree format `{tree_format}`"))?;
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let mut ds = Dataset::default();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let s: Screen = serde_json::from_str(line).with_context(|| format!("line {}", i + 1))?;
                let tree = adapter.to_canonical(&s.accessibility_tree).with_context(|| format!("state {}", s.state_id))?;
                ds.states.push(annotate_state(&tree, &s.state_id, &s.screenshot_ref).with_context(|| format!("state {}", s.state_id))?);
            }
            ds.canonicalize();
            // round-trip through the reader so duplicate ids are caught
            let ds = Dataset::from_jsonl(&ds.to_jsonl())?;
            ds.save(&out)?;
        }
        Command::Expand { dataset, out, dimension, generator, issues } => {
            let ds = load_dataset(&dataset)?;
            let gen = Generator::new(&generator, &cfg, seed)?;
            let mut ecfg = cfg.pipeline.expansion.clone();
            ecfg.concurrency = gen.concurrency;
            let (expanded, found) = expand_dataset(&ds, &gen.client, &dimension.dims(), &ecfg);
            gen.finish()?;
            expanded.save(&out)?;
            if let Some(path) = issues {
                write_jsonl(&path, &found)?;
            }
            log::info!(
                "{} instructions generated, {} issues",
                expanded.instructions.len() - ds.instructions.len(),
                found.len()
            );
        }
        Command::Filter { dataset, out, generator, audit } => {
            let ds = load_dataset(&dataset)?;
            let gen = Generator::new(&generator, &cfg, seed)?;
            let (filtered, outcome) = filter_dataset(&ds, &gen.client, gen.concurrency);
            gen.finish()?;
            filtered.save(&out)?;
            if let Some(path) = audit {
                write_jsonl(&path, &outcome.audit)?;
            }
            log::info!("kept {} of {} instructions", outcome.kept.len(), ds.instructions.len());
        }
        Command::Classify { dataset, out, generator, records } => {
            let ds = load_dataset(&dataset)?;
            let gen = Generator::new(&generator, &cfg, seed)?;
            let (classified, recs) = classify_tasks(&ds, &gen.client, gen.concurrency);
            gen.finish()?;
            classified.save(&out)?;
            if let Some(path) = records {
                write_jsonl(&path, &recs)?;
            }
        }
        Command::Tree { dataset, out, merge_key, merged_dataset } => {
            let ds = load_dataset(&dataset)?;
            let tree = build_trajectory_tree(&ds, merge_key)?;
            fs::write(&out, serde_json::to_string_pretty(&tree)? + "\n").with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = merged_dataset {
                let merged = match merge_key {
                    Some(k) => merge_states(&ds, |s| k.key(s))?,
                    None => ds,
                };
                merged.save(&path)?;
            }
            log::info!("{} nodes, {} edges", tree.nodes.len(), tree.edges.len());
        }
        Command::Evaluate { dataset, predictions, dimension, out, space, challenging_k } => {
            let ds = load_dataset(&dataset)?;
            let dim = Dimension::from(dimension);
            let groups = ds.state_groups(dim)?;
            let violations: Vec<_> =
                groups.iter().flat_map(validate_state_group).filter(|v| v.kind != ViolationKind::EmptyGroup).collect();
            if let Some(v) = violations.first() {
                bail!(InvalidDataset(format!("{:?}: {}", v.kind, v.detail)));
            }
            let records = match predictions {
                Some(path) => load_predictions(&path)?,
                None => {
                    stateval_core::harness::check_unique(&ds.predictions)?;
                    ds.predictions.clone()
                }
            };
            let known: HashSet<&str> = ds.instructions.iter().map(|i| i.instruction_id()).collect();
            if let Some(r) = records.iter().find(|r| !known.contains(r.instruction_id.as_str())) {
                bail!(MetricsError::UnknownInstructionId(r.instruction_id.clone()));
            }
            let in_dim: HashSet<&str> = groups.iter().flat_map(|g| g.instructions.iter().map(|i| i.instruction_id())).collect();
            let records: Vec<_> = records.into_iter().filter(|r| in_dim.contains(r.instruction_id.as_str())).collect();
            let preds = resolve_predictions(&records, &groups, space.space()?);
            let summary = aggregate(&groups, &preds, &cfg.eval_config())?;
            let k = challenging_k.unwrap_or(cfg.analysis.challenging_k);
            ReportBundle::new(std::slice::from_ref(&summary), k).write(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", stateval_core::report::render_tables(std::slice::from_ref(&summary)).trim_end());
        }
        Command::Report { summary, out, challenging_k } => {
            let mut all = Vec::new();
            for path in &summary {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                all.extend(parse_summaries(&text).with_context(|| format!("parsing {}", path.display()))?);
            }
            let k = challenging_k.unwrap_or(cfg.analysis.challenging_k);
            ReportBundle::new(&all, k).write(&out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::RunAdapter { dataset, dimension, out, command, url, replay, cache, agent_id, image_root, concurrency, timeout_s } => {
            let ds = load_dataset(&dataset)?;
            let groups = ds.state_groups(dimension.into())?;
            let h = &cfg.harness;
            let handshake_timeout = Duration::from_secs(h.handshake_timeout_s);
            let (adapter, default_concurrency): (Option<Box<dyn Adapter>>, usize) = if let Some(cmd) = command {
                (Some(Box::new(StdioAdapter::spawn(&cmd, handshake_timeout)?)), h.stdio_concurrency)
            } else if let Some(url) = url {
                (Some(Box::new(HttpAdapter::connect(url, handshake_timeout)?)), h.http_concurrency)
            } else if replay {
                (Some(Box::new(ReplayAdapter::new(&groups))), h.http_concurrency)
            } else {
                (None, 1)
            };
            let mut pcache = match &cache {
                Some(path) => PredictionCache::load(path)?,
                None => PredictionCache::new(),
            };
            let opts = BatchOptions {
                concurrency: concurrency.unwrap_or(default_concurrency).max(1),
                timeout: Duration::from_secs(timeout_s.unwrap_or(h.timeout_s)),
                image_root,
                agent_id,
                ..Default::default()
            };
            let result = run_batch(&groups, adapter.as_deref(), &mut pcache, &opts);
            drop(adapter);
            if let Some(path) = &cache {
                pcache.save(path)?;
            }
            let batch = result?;
            fs::write(&out, predictions_to_jsonl(&batch.records)).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("{}", serde_json::to_string(&json!({"agent_id": batch.agent_id, "stats": batch.stats}))?);
        }
    }
    Ok(())
}

#[derive(Debug)]
struct InvalidDataset(String);

impl std::fmt::Display for InvalidDataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid dataset: {}", self.0)
    }
}

impl std::error::Error for InvalidDataset {}

/// A short machine-readable name for the kind of failure.
fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<MetricsError>() {
            return match e {
                MetricsError::UnknownInstructionId(_) => "unknown_instruction_id",
                MetricsError::DuplicatePrediction(_) => "duplicate_prediction",
                MetricsError::Config(_) => "config",
                _ => "metrics",
            };
        }
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            return match e {
                HarnessError::DuplicatePrediction(_) => "duplicate_prediction",
                HarnessError::AdapterUnreachable(_) | HarnessError::Adapter(_) => "adapter",
                _ => "harness",
            };
        }
        if cause.downcast_ref::<FormatError>().is_some() || cause.downcast_ref::<InvalidDataset>().is_some() {
            return "format";
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = json!({"error": error_kind(&err), "message": format!("{err:#}")});
            eprintln!("{record}");
            ExitCode::from(1)
        }
    }
}
#[cfg(test)]
mod tests {
    #[test]
    fn example_config_lists_the_defaults() {
        let text = include_str!("../../../docs/config.example.toml");
        let parsed: stateval_core::Config = toml::from_str(text).unwrap();
        assert_eq!(parsed, stateval_core::Config::default());
    }
}

//! Running agents over a dataset and collecting their predictions.
//!
//! An [`Adapter`] hides how an agent is reached: a child process speaking
//! line-delimited JSON ([`StdioAdapter`]), an HTTP endpoint
//! ([`HttpAdapter`]), or the built-in [`ReplayAdapter`] that answers with the
//! gold actions. [`run_batch`] sends one request per instruction, consults
//! and fills a [`PredictionCache`], and returns one record per instruction.

pub mod protocol;
pub mod replay;
pub mod stdio;

#[cfg(feature = "http")]
pub mod http;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::format::{predictions_from_jsonl, FormatError, PredictionRecord};
use crate::dataset::prompts::PROMPT_VERSION;
use crate::exec::map_bounded;
use crate::grammar::{parse_action_in, CoordinateSpace};
use crate::model::{Instruction, Prediction, PredictionOutcome, StateGroup, UiState};

pub use protocol::{AdapterRequest, AdapterResponse, Handshake, ImageMode, Message, PROTOCOL_VERSION};
pub use replay::ReplayAdapter;
pub use stdio::StdioAdapter;

#[cfg(feature = "http")]
pub use http::HttpAdapter;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("adapter unreachable: {0}")]
    Unreachable(String),
    #[error("timed out")]
    Timeout,
    #[error("protocol error: {0}")]
    Protocol(String),
    /// The adapter answered with an error for this request.
    #[error("adapter error: {0}")]
    Remote(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("every request failed to reach the adapter: {0}")]
    AdapterUnreachable(String),
    #[error("{0} instructions are not cached and no adapter was given")]
    CacheIncomplete(usize),
    #[error("duplicate prediction for instruction {0}")]
    DuplicatePrediction(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Something that turns one request into one raw answer.
pub trait Adapter: Send + Sync {
    fn handshake(&self) -> &Handshake;
    fn call(&self, request: &AdapterRequest, timeout: Duration) -> Result<AdapterResponse, AdapterError>;
}

impl<A: Adapter + ?Sized> Adapter for Box<A> {
    fn handshake(&self) -> &Handshake {
        (**self).handshake()
    }
    fn call(&self, request: &AdapterRequest, timeout: Duration) -> Result<AdapterResponse, AdapterError> {
        (**self).call(request, timeout)
    }
}

pub(crate) fn check_handshake(hs: &Handshake) -> Result<(), AdapterError> {
    if hs.protocol_version != PROTOCOL_VERSION {
        return Err(AdapterError::Protocol(format!(
            "adapter speaks protocol {}, expected {PROTOCOL_VERSION}",
            hs.protocol_version
        )));
    }
    if hs.agent_id.is_empty() {
        return Err(AdapterError::Protocol("empty agent_id in handshake".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
struct CacheEntry {
    agent_id: String,
    instruction_id: String,
    prompt_version: String,
    raw: String,
}

/// Raw answers keyed by agent, instruction and prompt version, so a rerun
/// only calls the agent for what changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionCache {
    entries: BTreeMap<(String, String, String), String>,
}

impl PredictionCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a cache file; a missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::new()),
            Err(e) => return Err(e.into()),
        };
        let mut cache = Self::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e: CacheEntry =
                serde_json::from_str(line).map_err(|err| HarnessError::Cache(format!("line {}: {err}", i + 1)))?;
            cache.entries.insert((e.agent_id, e.instruction_id, e.prompt_version), e.raw);
        }
        Ok(cache)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ((agent_id, instruction_id, prompt_version), raw) in &self.entries {
            let e = CacheEntry {
                agent_id: agent_id.clone(),
                instruction_id: instruction_id.clone(),
                prompt_version: prompt_version.clone(),
                raw: raw.clone(),
            };
            out.push_str(&serde_json::to_string(&e).expect("cache entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn get(&self, agent_id: &str, instruction_id: &str, prompt_version: &str) -> Option<&str> {
        self.entries
            .get(&(agent_id.to_string(), instruction_id.to_string(), prompt_version.to_string()))
            .map(String::as_str)
    }

    pub fn insert(&mut self, agent_id: &str, instruction_id: &str, prompt_version: &str, raw: String) {
        self.entries.insert((agent_id.to_string(), instruction_id.to_string(), prompt_version.to_string()), raw);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub concurrency: usize,
    pub timeout: Duration,
    pub prompt_version: String,
    /// Screenshot references are resolved against this directory.
    pub image_root: Option<PathBuf>,
    /// Agent id used for cache lookups when no adapter is given.
    pub agent_id: Option<String>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            concurrency: 1,
            timeout: Duration::from_secs(120),
            prompt_version: PROMPT_VERSION.to_string(),
            image_root: None,
            agent_id: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub instructions: usize,
    pub cache_hits: usize,
    pub calls: usize,
    pub failures: usize,
    pub timeouts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub agent_id: String,
    /// Exactly one record per instruction, sorted by instruction id.
    pub records: Vec<PredictionRecord>,
    pub stats: BatchStats,
}

fn build_request(
    n: usize,
    ins: &Instruction,
    state: &UiState,
    mode: ImageMode,
    image_root: Option<&Path>,
) -> Result<AdapterRequest, String> {
    let path = match image_root {
        Some(root) => root.join(&state.screenshot_ref),
        None => PathBuf::from(&state.screenshot_ref),
    };
    let (screenshot_ref, image_base64) = match mode {
        ImageMode::Path => (Some(path.to_string_lossy().into_owned()), None),
        ImageMode::Inline => {
            use base64::Engine;
            let bytes = fs::read(&path).map_err(|e| format!("cannot read screenshot {}: {e}", path.display()))?;
            (None, Some(base64::engine::general_purpose::STANDARD.encode(bytes)))
        }
    };
    Ok(AdapterRequest {
        request_id: format!("req-{n}"),
        instruction_id: ins.instruction_id().to_string(),
        instruction: ins.text().to_string(),
        low_level: ins.low_level().map(str::to_string),
        dimension: ins.dimension(),
        screenshot_ref,
        image_base64,
    })
}

/// Collects one raw answer per instruction. Cached answers are reused;
/// the rest are requested from `adapter` with bounded concurrency. A request
/// that times out or fails becomes a record with no answer and an error, so
/// the output always covers every instruction exactly once. Only when every
/// request fails to reach the adapter does the batch fail as a whole.
pub fn run_batch(
    groups: &[StateGroup],
    adapter: Option<&dyn Adapter>,
    cache: &mut PredictionCache,
    opts: &BatchOptions,
) -> Result<BatchOutput, HarnessError> {
    let agent_id = match (adapter, &opts.agent_id) {
        (Some(a), _) => a.handshake().agent_id.clone(),
        (None, Some(id)) => id.clone(),
        (None, None) => return Err(HarnessError::Cache("no adapter and no agent id".into())),
    };
    let pv = opts.prompt_version.as_str();
    let mut stats = BatchStats::default();
    let mut records: Vec<PredictionRecord> = Vec::new();
    let mut misses: Vec<(&Instruction, &UiState)> = Vec::new();
    for g in groups {
        for ins in &g.instructions {
            stats.instructions += 1;
            match cache.get(&agent_id, ins.instruction_id(), pv) {
                Some(raw) => {
                    stats.cache_hits += 1;
                    records.push(PredictionRecord {
                        instruction_id: ins.instruction_id().to_string(),
                        agent_id: agent_id.clone(),
                        raw: Some(raw.to_string()),
                        error: None,
                    });
                }
                None => misses.push((ins, &g.state)),
            }
        }
    }

    if !misses.is_empty() {
        let Some(adapter) = adapter else {
            return Err(HarnessError::CacheIncomplete(misses.len()));
        };
        let mode = adapter.handshake().image_mode;
        let indexed: Vec<(usize, &Instruction, &UiState)> =
            misses.iter().enumerate().map(|(n, (i, s))| (n, *i, *s)).collect();
        let answers = map_bounded(&indexed, opts.concurrency, None, |(n, ins, state)| {
            let req = build_request(*n, ins, state, mode, opts.image_root.as_deref()).map_err(AdapterError::Remote)?;
            let resp = adapter.call(&req, opts.timeout)?;
            if resp.request_id != req.request_id {
                return Err(AdapterError::Protocol(format!(
                    "response id {} does not match request {}",
                    resp.request_id, req.request_id
                )));
            }
            Ok(resp.raw)
        });
        stats.calls = answers.len();
        let unreachable: Vec<&AdapterError> =
            answers.iter().filter_map(|a| a.as_ref().err()).filter(|e| matches!(e, AdapterError::Unreachable(_))).collect();
        if unreachable.len() == answers.len() {
            return Err(HarnessError::AdapterUnreachable(unreachable[0].to_string()));
        }
        for ((ins, _), answer) in misses.iter().zip(answers) {
            let id = ins.instruction_id().to_string();
            match answer {
                Ok(raw) => {
                    cache.insert(&agent_id, &id, pv, raw.clone());
                    records.push(PredictionRecord { instruction_id: id, agent_id: agent_id.clone(), raw: Some(raw), error: None });
                }
                Err(e) => {
                    stats.failures += 1;
                    if e == AdapterError::Timeout {
                        stats.timeouts += 1;
                    }
                    log::warn!("instruction {id}: {e}");
                    records.push(PredictionRecord {
                        instruction_id: id,
                        agent_id: agent_id.clone(),
                        raw: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }
    records.sort();
    Ok(BatchOutput { agent_id, records, stats })
}

/// Reads a predictions file, rejecting a second answer for the same instruction.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, HarnessError> {
    let text = fs::read_to_string(path)?;
    let records = predictions_from_jsonl(&text)?;
    check_unique(&records)?;
    Ok(records)
}

pub fn check_unique(records: &[PredictionRecord]) -> Result<(), HarnessError> {
    let mut seen = HashMap::new();
    for r in records {
        if seen.insert(r.instruction_id.as_str(), ()).is_some() {
            return Err(HarnessError::DuplicatePrediction(r.instruction_id.clone()));
        }
    }
    Ok(())
}

/// Parses raw answers against the state each instruction belongs to.
/// Records for unknown instructions are parsed without widget context.
pub fn resolve_predictions(records: &[PredictionRecord], groups: &[StateGroup], space: CoordinateSpace) -> Vec<Prediction> {
    let state_of: HashMap<&str, &UiState> =
        groups.iter().flat_map(|g| g.instructions.iter().map(move |i| (i.instruction_id(), &g.state))).collect();
    records
        .iter()
        .map(|r| {
            let outcome = match &r.raw {
                None => PredictionOutcome::Missing(r.error.clone().unwrap_or_else(|| "no answer".into())),
                Some(raw) => match parse_action_in(raw, state_of.get(r.instruction_id.as_str()).copied(), space) {
                    Ok(a) => PredictionOutcome::Parsed(a),
                    Err(e) => PredictionOutcome::ParseError(e.to_string()),
                },
            };
            Prediction { instruction_id: r.instruction_id.clone(), agent_id: r.agent_id.clone(), raw: r.raw.clone(), outcome }
        })
        .collect()
}

//! Line-delimited dataset files.
//!
//! The first line is a header, `{"format_version":1,"kind":"header"}`. Every
//! following line is one JSON object whose `kind` is `state`, `instruction`,
//! `episode` or `prediction`. Keys are written in sorted order and
//! coordinates are always normalized. Top-level fields this version does not
//! know are kept and written back unchanged.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{Action, Dimension, Instruction, StateGroup, UiState};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("unsupported format version {found} (this build reads version {FORMAT_VERSION})")]
    FormatVersionMismatch { found: Value },
    #[error("line {line} ({record}): {message}")]
    SchemaViolation { line: usize, record: String, message: String },
}

impl FormatError {
    fn schema(line: usize, record: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::SchemaViolation { line, record: record.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub state_id: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_level: Option<String>,
}

/// An ordered sequence of screens; step `t`'s action leads to step `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub goal: String,
    pub steps: Vec<EpisodeStep>,
}

/// One line of a prediction file; `raw` is absent when the agent gave no answer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instruction_id: String,
    pub agent_id: String,
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordKind {
    State,
    Instruction,
    Episode,
    Prediction,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::State => "state",
            RecordKind::Instruction => "instruction",
            RecordKind::Episode => "episode",
            RecordKind::Prediction => "prediction",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "state" => RecordKind::State,
            "instruction" => RecordKind::Instruction,
            "episode" => RecordKind::Episode,
            "prediction" => RecordKind::Prediction,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub states: Vec<UiState>,
    pub instructions: Vec<Instruction>,
    pub episodes: Vec<Episode>,
    pub predictions: Vec<PredictionRecord>,
    /// Unknown top-level fields, keyed by record kind and id.
    pub extras: BTreeMap<(RecordKind, String), Map<String, Value>>,
}

fn prediction_key(p: &PredictionRecord) -> String {
    format!("{}/{}", p.agent_id, p.instruction_id)
}

fn to_object<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value).expect("dataset records serialize") {
        Value::Object(map) => map,
        other => panic!("record serialized to non-object {other}"),
    }
}

impl Dataset {
    pub fn state(&self, state_id: &str) -> Option<&UiState> {
        self.states.iter().find(|s| s.state_id == state_id)
    }

    pub fn state_index(&self) -> HashMap<&str, &UiState> {
        self.states.iter().map(|s| (s.state_id.as_str(), s)).collect()
    }

    /// Sorts every record list by id so output order never depends on how
    /// the records were produced.
    pub fn canonicalize(&mut self) {
        self.states.sort_by(|a, b| a.state_id.cmp(&b.state_id));
        self.instructions
            .sort_by(|a, b| (a.state_id(), a.instruction_id()).cmp(&(b.state_id(), b.instruction_id())));
        self.episodes.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
        self.predictions.sort();
    }

    /// Groups the instructions of one dimension by state, in state order.
    /// States without instructions of that dimension are not part of it.
    pub fn state_groups(&self, dimension: Dimension) -> Result<Vec<StateGroup>, FormatError> {
        let index = self.state_index();
        let mut by_state: BTreeMap<&str, Vec<Instruction>> = BTreeMap::new();
        for ins in self.instructions.iter().filter(|i| i.dimension() == dimension) {
            if !index.contains_key(ins.state_id()) {
                return Err(FormatError::schema(
                    0,
                    format!("instruction {}", ins.instruction_id()),
                    format!("unknown state_id {}", ins.state_id()),
                ));
            }
            by_state.entry(ins.state_id()).or_default().push(ins.clone());
        }
        Ok(by_state
            .into_iter()
            .map(|(id, instructions)| StateGroup { state: index[id].clone(), dimension, instructions })
            .collect())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({"format_version": FORMAT_VERSION, "kind": "header"});
        out.push_str(&header.to_string());
        out.push('\n');
        let mut emit = |kind: RecordKind, id: &str, mut obj: Map<String, Value>| {
            if let Some(extra) = self.extras.get(&(kind, id.to_string())) {
                for (k, v) in extra {
                    obj.entry(k.clone()).or_insert_with(|| v.clone());
                }
            }
            obj.insert("kind".into(), Value::String(kind.as_str().into()));
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        };
        for s in &self.states {
            emit(RecordKind::State, &s.state_id, to_object(s));
        }
        for i in &self.instructions {
            emit(RecordKind::Instruction, i.instruction_id(), to_object(i));
        }
        for e in &self.episodes {
            emit(RecordKind::Episode, &e.episode_id, to_object(e));
        }
        for p in &self.predictions {
            emit(RecordKind::Prediction, &prediction_key(p), to_object(p));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Dataset, FormatError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
        let (line_no, first) = lines.next().ok_or_else(|| FormatError::schema(1, "header", "empty file"))?;
        let header: Map<String, Value> =
            serde_json::from_str(first).map_err(|e| FormatError::schema(line_no, "header", e.to_string()))?;
        if header.get("kind").and_then(Value::as_str) != Some("header") {
            return Err(FormatError::schema(line_no, "header", "first record must be the header"));
        }
        match header.get("format_version") {
            Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
            Some(v) => return Err(FormatError::FormatVersionMismatch { found: v.clone() }),
            None => return Err(FormatError::schema(line_no, "header", "missing format_version")),
        }

        let mut ds = Dataset::default();
        let mut instruction_lines = Vec::new();
        let mut seen: HashSet<(RecordKind, String)> = HashSet::new();
        for (line_no, line) in lines {
            let obj: Map<String, Value> =
                serde_json::from_str(line).map_err(|e| FormatError::schema(line_no, "record", e.to_string()))?;
            let kind_name = obj.get("kind").and_then(Value::as_str).unwrap_or_default().to_string();
            let kind = RecordKind::parse(&kind_name)
                .ok_or_else(|| FormatError::schema(line_no, "record", format!("unknown kind `{kind_name}`")))?;
            let label = record_label(kind, &obj);
            let (id, known) = match kind {
                RecordKind::State => {
                    let s: UiState = typed(&obj, line_no, &label)?;
                    let id = s.state_id.clone();
                    let known = to_object(&s);
                    ds.states.push(s);
                    (id, known)
                }
                RecordKind::Instruction => {
                    let i: Instruction = typed(&obj, line_no, &label)?;
                    let id = i.instruction_id().to_string();
                    let known = to_object(&i);
                    instruction_lines.push(line_no);
                    ds.instructions.push(i);
                    (id, known)
                }
                RecordKind::Episode => {
                    let e: Episode = typed(&obj, line_no, &label)?;
                    let id = e.episode_id.clone();
                    let known = to_object(&e);
                    ds.episodes.push(e);
                    (id, known)
                }
                RecordKind::Prediction => {
                    let p: PredictionRecord = typed(&obj, line_no, &label)?;
                    let id = prediction_key(&p);
                    let known = to_object(&p);
                    ds.predictions.push(p);
                    (id, known)
                }
            };
            if !seen.insert((kind, id.clone())) {
                return Err(FormatError::schema(line_no, label, "duplicate id"));
            }
            let extra: Map<String, Value> =
                obj.into_iter().filter(|(k, _)| k != "kind" && !known.contains_key(k)).collect();
            if !extra.is_empty() {
                ds.extras.insert((kind, id), extra);
            }
        }

        let states: HashSet<&str> = ds.states.iter().map(|s| s.state_id.as_str()).collect();
        for (ins, line_no) in ds.instructions.iter().zip(&instruction_lines) {
            if !states.contains(ins.state_id()) {
                return Err(FormatError::schema(
                    *line_no,
                    format!("instruction {}", ins.instruction_id()),
                    format!("state_id {} does not name a state in this file", ins.state_id()),
                ));
            }
        }
        for e in &ds.episodes {
            if let Some(step) = e.steps.iter().find(|s| !states.contains(s.state_id.as_str())) {
                return Err(FormatError::schema(
                    0,
                    format!("episode {}", e.episode_id),
                    format!("step state_id {} does not name a state in this file", step.state_id),
                ));
            }
        }
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Dataset, FormatError> {
        let text = fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
        Dataset::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        fs::write(path, self.to_jsonl()).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
    }
}

fn record_label(kind: RecordKind, obj: &Map<String, Value>) -> String {
    let id_key = match kind {
        RecordKind::State => "state_id",
        RecordKind::Instruction | RecordKind::Prediction => "instruction_id",
        RecordKind::Episode => "episode_id",
    };
    match obj.get(id_key).and_then(Value::as_str) {
        Some(id) => format!("{} {id}", kind.as_str()),
        None => kind.as_str().to_string(),
    }
}

fn typed<T: DeserializeOwned>(obj: &Map<String, Value>, line: usize, label: &str) -> Result<T, FormatError> {
    serde_json::from_value(Value::Object(obj.clone())).map_err(|e| FormatError::schema(line, label, e.to_string()))
}

/// Prediction files are plain JSONL without a header.
pub fn predictions_to_jsonl(records: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&Value::Object(to_object(r)).to_string());
        out.push('\n');
    }
    out
}

pub fn predictions_from_jsonl(text: &str) -> Result<Vec<PredictionRecord>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<PredictionRecord>(l).map_err(|e| FormatError::schema(i + 1, "prediction", e.to_string()))
        })
        .collect()
}

//! Dataset expansion: multi-widget instructions on each state and
//! uni-widget instructions on each `(S_t, A_t, S_t+1)` transition.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::format::Dataset;
use super::generator::{ClientError, GeneratorClient};
use crate::correctness::token_f1;
use crate::exec::map_bounded;
use crate::grammar::{action_from_record, CoordinateSpace};
use crate::model::{Action, ActionKind, Dimension, GoldTarget, Instruction, UiState};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionConfig {
    pub mwam_per_state: usize,
    pub uwiu_per_state: usize,
    /// Action kinds requested for multi-widget slots, cycled in order.
    pub mwam_hints: Vec<ActionKind>,
    /// Instructions on one state whose token F1 reaches this are near-duplicates.
    pub dedup_f1: f64,
    pub concurrency: usize,
    /// Minimum spacing between client calls across workers, in milliseconds.
    pub min_interval_ms: u64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            mwam_per_state: 5,
            uwiu_per_state: 5,
            mwam_hints: vec![ActionKind::Click],
            dedup_f1: 0.9,
            concurrency: 4,
            min_interval_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    ClientFailure,
    SchemaViolation,
    Duplicate,
}

/// An item the pipeline dropped, kept for the audit log.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpansionIssue {
    pub state_id: String,
    pub dimension: Dimension,
    pub slot: usize,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expansion {
    pub instructions: Vec<Instruction>,
    pub issues: Vec<ExpansionIssue>,
}

fn issue_from(e: &ClientError) -> IssueKind {
    match e {
        ClientError::Backend(_) => IssueKind::ClientFailure,
        ClientError::BadReply { .. } => IssueKind::SchemaViolation,
    }
}

pub fn instruction_id(state_id: &str, dimension: Dimension, slot: usize) -> String {
    format!("{state_id}-{}-{slot}", dimension.as_str())
}

/// Up to `n` instructions on `state`, each on a widget not used before when
/// the client can manage it. Pointer golds are the answered widget's box;
/// other actions are gold as translated.
pub fn expand_mwam(state: &UiState, client: &dyn GeneratorClient, n: usize, hints: &[ActionKind]) -> Expansion {
    let mut out = Expansion::default();
    let mut taken: Vec<u32> = Vec::new();
    let hints = if hints.is_empty() { &[ActionKind::Click][..] } else { hints };
    for slot in 0..n {
        let mut issue = |kind, message: String| {
            log::warn!("state {} slot {slot}: {message}", state.state_id);
            out.issues.push(ExpansionIssue { state_id: state.state_id.clone(), dimension: Dimension::Mwam, slot, kind, message });
        };
        let hint = hints[slot % hints.len()];
        let generated = match client.generate_instruction(state, hint, &taken) {
            Ok(g) => g,
            Err(e) => {
                issue(issue_from(&e), e.to_string());
                continue;
            }
        };
        let Some(widget) = u32::try_from(generated.ui_item).ok().and_then(|i| state.widget(i)) else {
            issue(IssueKind::SchemaViolation, format!("UI item {} is not a widget on this screen", generated.ui_item));
            continue;
        };
        taken.push(widget.index);
        let record = match client.translate_action(&generated.sub_instruction, widget.index, state) {
            Ok(r) => r,
            Err(e) => {
                issue(issue_from(&e), e.to_string());
                continue;
            }
        };
        let action = match action_from_record(&record, Some(state), CoordinateSpace::Normalized) {
            Ok(a) => a,
            Err(e) => {
                issue(IssueKind::SchemaViolation, format!("translated action: {e}"));
                continue;
            }
        };
        let gold = if action.kind().is_pointer() {
            let target = record.ui.and_then(|i| u32::try_from(i).ok()).and_then(|i| state.widget(i)).unwrap_or(widget);
            GoldTarget::WidgetBox { bbox: target.bbox }
        } else {
            GoldTarget::ExactAction { action: action.clone() }
        };
        let id = instruction_id(&state.state_id, Dimension::Mwam, slot);
        match Instruction::new(id, generated.high_level_instruction, &state.state_id, Dimension::Mwam, gold, action.kind()) {
            Ok(i) => out.instructions.push(i.with_low_level(Some(generated.sub_instruction))),
            Err(e) => issue(IssueKind::SchemaViolation, e.to_string()),
        }
    }
    out
}

/// One observed transition of an episode.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub state: &'a UiState,
    pub action: &'a Action,
    pub next: &'a UiState,
    pub low_level: Option<&'a str>,
}

/// A plain-words rendering used when a step carries no low-level instruction.
pub fn describe_action(action: &Action) -> String {
    match action {
        Action::Click { target } => format!("Click at ({}, {})", target.x(), target.y()),
        Action::LongPress { target } => format!("Long press at ({}, {})", target.x(), target.y()),
        Action::TypeText { text } => format!("Type \"{text}\""),
        Action::Scroll { direction } => format!("Scroll {}", direction.as_str()),
        Action::NavigateHome => "Go to the home screen".into(),
        Action::NavigateBack => "Go back".into(),
        Action::OpenApp { app_name } => format!("Open app {app_name}"),
        Action::Wait => "Wait".into(),
        Action::Status { goal_status } => format!("Report the task as {}", goal_status.as_str()),
    }
}

/// Up to `n` high-level instructions drawn from the successor screen's
/// widgets. All of them live on the transition's source state and share its
/// action as gold.
pub fn expand_uwiu(t: Transition<'_>, client: &dyn GeneratorClient, n: usize) -> Expansion {
    let mut out = Expansion::default();
    let mut taken: Vec<u32> = Vec::new();
    let gold = match t.action.target() {
        Some(point) => GoldTarget::ReferencePoint { point },
        None => GoldTarget::ExactAction { action: t.action.clone() },
    };
    let low_level = t.low_level.map_or_else(|| describe_action(t.action), str::to_string);
    for slot in 0..n {
        let mut issue = |kind, message: String| {
            log::warn!("state {} slot {slot}: {message}", t.state.state_id);
            out.issues.push(ExpansionIssue { state_id: t.state.state_id.clone(), dimension: Dimension::Uwiu, slot, kind, message });
        };
        let generated = match client.generate_instruction(t.next, t.action.kind(), &taken) {
            Ok(g) => g,
            Err(e) => {
                issue(issue_from(&e), e.to_string());
                continue;
            }
        };
        let Some(widget) = u32::try_from(generated.ui_item).ok().and_then(|i| t.next.widget(i)) else {
            issue(IssueKind::SchemaViolation, format!("UI item {} is not a widget on the next screen", generated.ui_item));
            continue;
        };
        taken.push(widget.index);
        let id = instruction_id(&t.state.state_id, Dimension::Uwiu, slot);
        match Instruction::new(id, generated.high_level_instruction, &t.state.state_id, Dimension::Uwiu, gold.clone(), t.action.kind()) {
            Ok(i) => out
                .instructions
                .push(i.with_low_level(Some(low_level.clone())).with_next_state(Some(t.next.state_id.clone()))),
            Err(e) => issue(IssueKind::SchemaViolation, e.to_string()),
        }
    }
    out
}

fn normalized_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Drops exact and near-duplicate instruction texts within each state and
/// dimension, keeping the first in instruction-id order.
pub fn deduplicate(instructions: Vec<Instruction>, min_f1: f64) -> (Vec<Instruction>, Vec<ExpansionIssue>) {
    let threshold = Rational::from_decimal_f64(min_f1).unwrap_or_else(Rational::one);
    let mut sorted = instructions;
    sorted.sort_by(|a, b| (a.state_id(), a.dimension(), a.instruction_id()).cmp(&(b.state_id(), b.dimension(), b.instruction_id())));
    let mut kept: Vec<Instruction> = Vec::with_capacity(sorted.len());
    let mut issues = Vec::new();
    let mut seen: HashMap<(String, Dimension), Vec<String>> = HashMap::new();
    for ins in sorted {
        let texts = seen.entry((ins.state_id().to_string(), ins.dimension())).or_default();
        let text = normalized_text(ins.text());
        if let Some(prior) = texts.iter().find(|t| **t == text || token_f1(t, &text) >= threshold) {
            issues.push(ExpansionIssue {
                state_id: ins.state_id().to_string(),
                dimension: ins.dimension(),
                slot: slot_of(ins.instruction_id()),
                kind: IssueKind::Duplicate,
                message: format!("{} duplicates \"{prior}\"", ins.instruction_id()),
            });
            continue;
        }
        texts.push(text);
        kept.push(ins);
    }
    (kept, issues)
}

fn slot_of(id: &str) -> usize {
    id.rsplit('-').next().and_then(|s| s.parse().ok()).unwrap_or(0)
}

/// Transitions of every episode, in episode then step order.
pub fn transitions(ds: &Dataset) -> Vec<Transition<'_>> {
    let index = ds.state_index();
    let mut out = Vec::new();
    for ep in &ds.episodes {
        for pair in ep.steps.windows(2) {
            if let (Some(state), Some(next)) = (index.get(pair[0].state_id.as_str()), index.get(pair[1].state_id.as_str())) {
                out.push(Transition { state, action: &pair[0].action, next, low_level: pair[0].low_level.as_deref() });
            }
        }
    }
    out
}

/// Runs expansion for the requested dimensions over a whole dataset and
/// appends the deduplicated instructions. Output order is canonical.
pub fn expand_dataset(
    ds: &Dataset,
    client: &dyn GeneratorClient,
    dimensions: &[Dimension],
    cfg: &ExpansionConfig,
) -> (Dataset, Vec<ExpansionIssue>) {
    let interval = (cfg.min_interval_ms > 0).then(|| std::time::Duration::from_millis(cfg.min_interval_ms));
    let mut produced = Vec::new();
    let mut issues = Vec::new();
    if dimensions.contains(&Dimension::Mwam) {
        for e in map_bounded(&ds.states, cfg.concurrency, interval, |s| expand_mwam(s, client, cfg.mwam_per_state, &cfg.mwam_hints)) {
            produced.extend(e.instructions);
            issues.extend(e.issues);
        }
    }
    if dimensions.contains(&Dimension::Uwiu) {
        let ts = transitions(ds);
        for e in map_bounded(&ts, cfg.concurrency, interval, |t| expand_uwiu(*t, client, cfg.uwiu_per_state)) {
            produced.extend(e.instructions);
            issues.extend(e.issues);
        }
    }
    let existing: std::collections::HashSet<&str> = ds.instructions.iter().map(Instruction::instruction_id).collect();
    produced.retain(|i| !existing.contains(i.instruction_id()));
    let (kept, dup) = deduplicate(produced, cfg.dedup_f1);
    issues.extend(dup);
    issues.sort();
    let mut out = ds.clone();
    out.instructions.extend(kept);
    out.canonicalize();
    (out, issues)
}

//! Quality filtering and task classification of generated data.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::expand::describe_action;
use super::format::Dataset;
use super::generator::{coerce_category, GeneratorClient, Judgement, FALLBACK_CATEGORY};
use crate::exec::map_bounded;
use crate::model::{Instruction, UiState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The low-level step does not serve the high-level instruction.
    LowHighMismatch,
    /// The gold action does not carry out the low-level step.
    ActionMismatch,
    ClientFailure,
    UnknownState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterAudit {
    pub instruction_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_high: Option<Judgement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_low: Option<Judgement>,
    pub kept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<DropReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Instruction>,
    pub dropped: Vec<(Instruction, DropReason)>,
    /// One entry per input instruction, in input order.
    pub audit: Vec<FilterAudit>,
}

/// Checks one instruction: the high/low-level consistency first, and the
/// action/low-level check only when the first passes.
pub fn check_instruction(ins: &Instruction, state: &UiState, client: &dyn GeneratorClient) -> FilterAudit {
    let mut audit = FilterAudit {
        instruction_id: ins.instruction_id().to_string(),
        low_high: None,
        action_low: None,
        kept: false,
        reason: None,
        error: None,
    };
    let gold = ins.gold_action();
    let low = ins.low_level().map_or_else(|| describe_action(&gold), str::to_string);
    match client.verify_low_high(ins.text(), &low, state) {
        Ok(j) => {
            let yes = j.yes;
            audit.low_high = Some(j);
            if !yes {
                audit.reason = Some(DropReason::LowHighMismatch);
                return audit;
            }
        }
        Err(e) => {
            audit.reason = Some(DropReason::ClientFailure);
            audit.error = Some(e.to_string());
            return audit;
        }
    }
    match client.verify_action_low(&low, &gold, state) {
        Ok(j) => {
            let yes = j.yes;
            audit.action_low = Some(j);
            if yes {
                audit.kept = true;
            } else {
                audit.reason = Some(DropReason::ActionMismatch);
            }
        }
        Err(e) => {
            audit.reason = Some(DropReason::ClientFailure);
            audit.error = Some(e.to_string());
        }
    }
    audit
}

/// Keeps an instruction iff both checks answer yes. Every input ends up in
/// exactly one of `kept` and `dropped`, in input order.
pub fn quality_filter(
    instructions: Vec<Instruction>,
    states: &HashMap<&str, &UiState>,
    client: &dyn GeneratorClient,
    concurrency: usize,
) -> FilterOutcome {
    let audit = map_bounded(&instructions, concurrency, None, |ins| match states.get(ins.state_id()) {
        Some(state) => check_instruction(ins, state, client),
        None => FilterAudit {
            instruction_id: ins.instruction_id().to_string(),
            low_high: None,
            action_low: None,
            kept: false,
            reason: Some(DropReason::UnknownState),
            error: None,
        },
    });
    let mut out = FilterOutcome::default();
    for (ins, a) in instructions.into_iter().zip(&audit) {
        match a.reason {
            None => out.kept.push(ins),
            Some(reason) => out.dropped.push((ins, reason)),
        }
    }
    out.audit = audit;
    out
}

/// Filters every instruction of a dataset, returning the filtered dataset.
pub fn filter_dataset(ds: &Dataset, client: &dyn GeneratorClient, concurrency: usize) -> (Dataset, FilterOutcome) {
    let index = ds.state_index();
    let outcome = quality_filter(ds.instructions.clone(), &index, client, concurrency);
    let mut out = ds.clone();
    out.instructions = outcome.kept.clone();
    out.canonicalize();
    (out, outcome)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub episode_id: String,
    pub answer: Option<String>,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Classifies each episode's goal and writes the category onto its states
/// and their instructions. Answers outside the category list, unusable
/// replies and client failures all become the fallback category.
pub fn classify_tasks(ds: &Dataset, client: &dyn GeneratorClient, concurrency: usize) -> (Dataset, Vec<ClassificationRecord>) {
    let index = ds.state_index();
    let records = map_bounded(&ds.episodes, concurrency, None, |ep| {
        let first = ep.steps.first().and_then(|s| index.get(s.state_id.as_str())).copied();
        match client.classify_task(&ep.goal, first) {
            Ok(answer) => {
                let category = coerce_category(&answer).unwrap_or_else(|| {
                    log::warn!("episode {}: category `{answer}` is not in the list; using {FALLBACK_CATEGORY}", ep.episode_id);
                    FALLBACK_CATEGORY
                });
                ClassificationRecord { episode_id: ep.episode_id.clone(), answer: Some(answer), category: category.into(), error: None }
            }
            Err(e) => {
                log::warn!("episode {}: classification failed ({e}); using {FALLBACK_CATEGORY}", ep.episode_id);
                ClassificationRecord {
                    episode_id: ep.episode_id.clone(),
                    answer: None,
                    category: FALLBACK_CATEGORY.into(),
                    error: Some(e.to_string()),
                }
            }
        }
    });
    let mut by_state: HashMap<String, String> = HashMap::new();
    for (ep, rec) in ds.episodes.iter().zip(&records) {
        for step in &ep.steps {
            by_state.entry(step.state_id.clone()).or_insert_with(|| rec.category.clone());
        }
    }
    let mut out = ds.clone();
    for s in &mut out.states {
        if let Some(c) = by_state.get(&s.state_id) {
            s.app_category = Some(c.clone());
        }
    }
    out.instructions = out
        .instructions
        .into_iter()
        .map(|i| match by_state.get(i.state_id()) {
            Some(c) => {
                let c = c.clone();
                i.with_task_category(Some(c))
            }
            None => i,
        })
        .collect();
    out.canonicalize();
    (out, records)
}

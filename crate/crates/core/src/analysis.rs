//! Error analysis over low-scoring states.
//!
//! The similarity of a state's erroneous actions separates systematic
//! failures (the agent repeats one wrong action, cohesion near 1) from
//! scattered ones (unrelated wrong actions, cohesion near 0).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correctness::{squared_distance_ratio, token_f1, CorrectnessConfig};
use crate::grammar::serialize_action;
use crate::model::{Action, Dimension, Stage, StateResult};
use crate::rational::Rational;

/// Identifies the similarity kernel below; bump when it changes.
pub const KERNEL_VERSION: &str = "pointer-decay-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohesionConfig {
    pub high_cut: f64,
    pub low_cut: f64,
    pub kernel_version: String,
}

impl Default for CohesionConfig {
    fn default() -> Self {
        CohesionConfig { high_cut: 0.8, low_cut: 0.2, kernel_version: KERNEL_VERSION.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Systematic,
    Scattered,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohesionReport {
    pub state_id: String,
    pub dimension: Dimension,
    pub n_errors: usize,
    pub cohesion: f64,
    pub diagnosis: Diagnosis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modal_action: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("cohesion needs at least two erroneous actions, got {0}")]
    TooFewErrors(usize),
    #[error("similarity kernel `{0}` is not supported (expected {KERNEL_VERSION})")]
    UnknownKernel(String),
}

/// Similarity of two actions in `[0, 1]`.
///
/// Different variants score 0. Pointer actions of one variant decay
/// linearly with distance and reach 0 at twice the correctness radius.
/// Typed text uses token F1; everything else is 1 iff equal.
pub fn action_similarity(a: &Action, b: &Action, cfg: &CorrectnessConfig) -> f64 {
    if a.kind() != b.kind() {
        return 0.0;
    }
    match (a, b) {
        (Action::Click { target: p } | Action::LongPress { target: p }, Action::Click { target: q } | Action::LongPress { target: q }) => {
            if !cfg.radius.is_finite() {
                return 0.0;
            }
            if cfg.radius <= 0.0 {
                return if p == q { 1.0 } else { 0.0 };
            }
            // (d / r)^2 is exact up to one rounding, and the division by 4 is exact
            let frac = (squared_distance_ratio(*p, *q, cfg.radius) / 4.0).sqrt();
            (1.0 - frac).clamp(0.0, 1.0)
        }
        (Action::TypeText { text: p }, Action::TypeText { text: q }) => token_f1(p, q).to_f64(),
        _ => {
            if a == b {
                1.0
            } else {
                0.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohesion {
    pub cohesion: f64,
    pub diagnosis: Diagnosis,
    pub modal_action: Option<Action>,
}

/// Mean pairwise similarity over all unordered pairs of `errors`.
pub fn cohesion(errors: &[Action], corr: &CorrectnessConfig, cfg: &CohesionConfig) -> Result<Cohesion, AnalysisError> {
    if cfg.kernel_version != KERNEL_VERSION {
        return Err(AnalysisError::UnknownKernel(cfg.kernel_version.clone()));
    }
    let n = errors.len();
    if n < 2 {
        return Err(AnalysisError::TooFewErrors(n));
    }
    let mut sims = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            sims.push(action_similarity(&errors[i], &errors[j], corr));
        }
    }
    // summing in sorted order makes the mean independent of input order
    sims.sort_by(f64::total_cmp);
    let value = sims.iter().sum::<f64>() / sims.len() as f64;
    let diagnosis = if value >= cfg.high_cut {
        Diagnosis::Systematic
    } else if value <= cfg.low_cut {
        Diagnosis::Scattered
    } else {
        Diagnosis::Mixed
    };
    Ok(Cohesion { cohesion: value, diagnosis, modal_action: modal_action(errors) })
}

/// Most frequent action; ties go to the lexicographically smallest canonical record.
pub fn modal_action(actions: &[Action]) -> Option<Action> {
    let mut counts: BTreeMap<String, (usize, &Action)> = BTreeMap::new();
    for a in actions {
        counts.entry(serialize_action(a)).or_insert((0, a)).0 += 1;
    }
    let mut best: Option<(usize, &Action)> = None;
    for (count, action) in counts.values() {
        if best.is_none_or(|(c, _)| *count > c) {
            best = Some((*count, action));
        }
    }
    best.map(|(_, a)| a.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengingState {
    pub state_id: String,
    pub em_state: Rational,
    pub m: usize,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohesion: Option<CohesionReport>,
}

/// The `k` weakest states: lowest EM first, then more instructions, then state id.
pub fn challenging_states(results: &[StateResult], k: usize) -> Vec<ChallengingState> {
    let mut ranked: Vec<&StateResult> = results.iter().collect();
    ranked.sort_by(|a, b| {
        a.em_state
            .cmp(&b.em_state)
            .then_with(|| b.m().cmp(&a.m()))
            .then_with(|| a.state_id.cmp(&b.state_id))
    });
    ranked
        .into_iter()
        .take(k)
        .map(|r| ChallengingState {
            state_id: r.state_id.clone(),
            em_state: r.em_state.clone(),
            m: r.m(),
            stage: r.stage,
            app_category: r.app_category.clone(),
            cohesion: r.cohesion.clone(),
        })
        .collect()
}

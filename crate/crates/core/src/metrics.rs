//! Exploration metrics: per-state EM, the macro average over states, the
//! pooled step success rate, capability stages and distribution summaries.
//!
//! Everything is accumulated as exact rationals. `em_all` averages states
//! (each state counts once); `success_rate` pools instructions. The two
//! agree when every state has the same number of instructions.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{cohesion, CohesionConfig, CohesionReport};
use crate::correctness::{judge_instruction, CorrectnessConfig};
use crate::model::{Dimension, Prediction, Stage, StateGroup, StateResult, Verdict};
use crate::rational::Rational;

/// Task label used for states without an app category.
pub const UNCATEGORIZED_TASK: &str = "Other";

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("EM is undefined for a state with no instructions")]
    EmptyGroup,
    #[error("no states to aggregate")]
    EmptyDataset,
    #[error("EM value {0} is outside [0, 1]")]
    OutOfRange(Rational),
    #[error("instruction {0} has more than one prediction")]
    DuplicatePrediction(String),
    #[error("prediction refers to unknown instruction {0}")]
    UnknownInstructionId(String),
    #[error("state {state_id} belongs to {found}, summary is for {expected}")]
    MixedDimensions { state_id: String, expected: Dimension, found: Dimension },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Upper (exclusive) bounds of the first three stages; the last stage is `[ps_upper, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBounds {
    pub ls_upper: Rational,
    pub is_upper: Rational,
    pub ps_upper: Rational,
}

impl Default for StageBounds {
    fn default() -> Self {
        StageBounds { ls_upper: Rational::new(3, 10), is_upper: Rational::new(6, 10), ps_upper: Rational::new(9, 10) }
    }
}

impl StageBounds {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let zero = Rational::zero();
        let one = Rational::one();
        if zero < self.ls_upper && self.ls_upper < self.is_upper && self.is_upper < self.ps_upper && self.ps_upper < one {
            Ok(())
        } else {
            Err(MetricsError::Config("stage bounds must satisfy 0 < ls < is < ps < 1".into()))
        }
    }
}

pub fn classify_stage(em: &Rational, bounds: &StageBounds) -> Result<Stage, MetricsError> {
    if *em < Rational::zero() || *em > Rational::one() {
        return Err(MetricsError::OutOfRange(em.clone()));
    }
    Ok(if *em < bounds.ls_upper {
        Stage::Learning
    } else if *em < bounds.is_upper {
        Stage::Improvement
    } else if *em < bounds.ps_upper {
        Stage::Proficient
    } else {
        Stage::Expert
    })
}

/// Fraction of correct verdicts in one state.
pub fn em_state(verdicts: &[Verdict]) -> Result<Rational, MetricsError> {
    if verdicts.is_empty() {
        return Err(MetricsError::EmptyGroup);
    }
    let correct = verdicts.iter().filter(|v| v.correct()).count();
    Ok(Rational::ratio(correct, verdicts.len()))
}

/// Unweighted mean of per-state EM. States without verdicts are skipped.
pub fn em_all(results: &[StateResult]) -> Result<Rational, MetricsError> {
    Rational::mean(results.iter().filter(|r| !r.verdicts.is_empty()).map(|r| &r.em_state))
        .ok_or(MetricsError::EmptyDataset)
}

/// Pooled fraction of correct verdicts across all states.
pub fn success_rate<'a, I: IntoIterator<Item = &'a Verdict>>(verdicts: I) -> Result<Rational, MetricsError> {
    let (mut correct, mut total) = (0usize, 0usize);
    for v in verdicts {
        total += 1;
        correct += usize::from(v.correct());
    }
    if total == 0 {
        return Err(MetricsError::EmptyDataset);
    }
    Ok(Rational::ratio(correct, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bimodality {
    pub frac_low: Rational,
    pub frac_high: Rational,
    pub frac_mid: Rational,
}

/// Share of states at or below `low`, at or above `high`, and strictly between.
pub fn bimodality_summary(results: &[StateResult], low: &Rational, high: &Rational) -> Result<Bimodality, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let n = results.len();
    let lo = results.iter().filter(|r| r.em_state <= *low).count();
    let hi = results.iter().filter(|r| r.em_state >= *high && r.em_state > *low).count();
    Ok(Bimodality {
        frac_low: Rational::ratio(lo, n),
        frac_high: Rational::ratio(hi, n),
        frac_mid: Rational::ratio(n - lo - hi, n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: Rational,
    pub upper: Rational,
    pub count: usize,
}

/// EM counts over `[0, 1]` in bins of `width`; bins are `[lo, hi)` except
/// the last, which also holds 1.
pub fn histogram(results: &[StateResult], width: &Rational) -> Result<Vec<HistogramBin>, MetricsError> {
    if *width <= Rational::zero() || *width > Rational::one() {
        return Err(MetricsError::Config(format!("histogram bin width {width} must be in (0, 1]")));
    }
    let ratio = Rational::one() / width.clone();
    let whole = ratio.numer() / ratio.denom();
    let n_bins = if ratio.is_integer() { whole } else { whole + 1u32 };
    let n_bins: usize = n_bins.try_into().map_err(|_| MetricsError::Config("too many histogram bins".into()))?;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| {
            let lower = width * &Rational::from_integer(i as i64);
            let upper = (width * &Rational::from_integer(i as i64 + 1)).min(Rational::one());
            HistogramBin { lower, upper, count: 0 }
        })
        .collect();
    for r in results {
        let q = r.em_state.clone() / width.clone();
        let idx: usize = (q.numer() / q.denom()).try_into().unwrap_or(usize::MAX);
        bins[idx.min(n_bins - 1)].count += 1;
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub correctness: CorrectnessConfig,
    pub stages: StageBounds,
    pub cohesion: CohesionConfig,
    pub histogram_bin_width: f64,
    pub bimodality_low: f64,
    pub bimodality_high: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            correctness: CorrectnessConfig::default(),
            stages: StageBounds::default(),
            cohesion: CohesionConfig::default(),
            histogram_bin_width: 0.05,
            bimodality_low: 0.1,
            bimodality_high: 0.9,
        }
    }
}

fn decimal(v: f64, what: &str) -> Result<Rational, MetricsError> {
    Rational::from_decimal_f64(v).ok_or_else(|| MetricsError::Config(format!("{what} is not finite")))
}

/// Everything reported for one agent on one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_id: Option<String>,
    pub dimension: Dimension,
    pub n_states: usize,
    pub n_instructions: usize,
    pub em_all: Rational,
    pub sr: Rational,
    pub stage_fractions: BTreeMap<Stage, Rational>,
    pub bimodality: Bimodality,
    pub histogram: Vec<HistogramBin>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_task: BTreeMap<String, EvaluationSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_states: Vec<String>,
    pub state_results: Vec<StateResult>,
}

impl EvaluationSummary {
    pub fn stage_fraction(&self, stage: Stage) -> Rational {
        self.stage_fractions.get(&stage).cloned().unwrap_or_default()
    }
}

/// Judges one state group and reduces it to a [`StateResult`].
pub fn evaluate_group(
    group: &StateGroup,
    predictions: &HashMap<&str, &Prediction>,
    cfg: &EvalConfig,
) -> Result<StateResult, MetricsError> {
    let verdicts: Vec<Verdict> = group
        .instructions
        .iter()
        .map(|ins| judge_instruction(ins, predictions.get(ins.instruction_id()).copied(), &cfg.correctness))
        .collect();
    let em = em_state(&verdicts)?;
    let stage = classify_stage(&em, &cfg.stages)?;
    let errors: Vec<_> = group
        .instructions
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| !v.correct())
        .filter_map(|(ins, _)| predictions.get(ins.instruction_id()).and_then(|p| p.parsed()).cloned())
        .collect();
    let cohesion_report = (errors.len() >= 2)
        .then(|| cohesion(&errors, &cfg.correctness, &cfg.cohesion))
        .transpose()
        .map_err(|e| MetricsError::Config(e.to_string()))?
        .map(|c| CohesionReport {
            state_id: group.state.state_id.clone(),
            dimension: group.dimension,
            n_errors: errors.len(),
            cohesion: c.cohesion,
            diagnosis: c.diagnosis,
            modal_action: c.modal_action,
        });
    Ok(StateResult {
        state_id: group.state.state_id.clone(),
        dimension: group.dimension,
        verdicts,
        em_state: em,
        stage,
        app_category: group.state.app_category.clone(),
        cohesion: cohesion_report,
    })
}

/// Joins predictions to instructions, judges them and summarizes per state,
/// per task and overall. Groups are judged in parallel; the result does not
/// depend on scheduling.
pub fn aggregate(
    groups: &[StateGroup],
    predictions: &[Prediction],
    cfg: &EvalConfig,
) -> Result<EvaluationSummary, MetricsError> {
    cfg.correctness.validate().map_err(|e| MetricsError::Config(e.to_string()))?;
    cfg.stages.validate()?;
    let dimension = groups.first().ok_or(MetricsError::EmptyDataset)?.dimension;
    if let Some(g) = groups.iter().find(|g| g.dimension != dimension) {
        return Err(MetricsError::MixedDimensions { state_id: g.state.state_id.clone(), expected: dimension, found: g.dimension });
    }

    let known: HashMap<&str, ()> =
        groups.iter().flat_map(|g| g.instructions.iter().map(|i| (i.instruction_id(), ()))).collect();
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if !known.contains_key(p.instruction_id.as_str()) {
            return Err(MetricsError::UnknownInstructionId(p.instruction_id.clone()));
        }
        if by_id.insert(p.instruction_id.as_str(), p).is_some() {
            return Err(MetricsError::DuplicatePrediction(p.instruction_id.clone()));
        }
    }

    let (judged, excluded): (Vec<&StateGroup>, Vec<&StateGroup>) = groups.iter().partition(|g| !g.instructions.is_empty());
    let results = judged
        .par_iter()
        .map(|g| evaluate_group(g, &by_id, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary = summarize(dimension, results, cfg)?;
    summary.excluded_states = excluded.iter().map(|g| g.state.state_id.clone()).collect();
    summary.agent_id = {
        let mut agents = predictions.iter().map(|p| p.agent_id.as_str());
        match agents.next() {
            Some(first) if agents.all(|a| a == first) => Some(first.to_string()),
            _ => None,
        }
    };

    let mut tasks: BTreeMap<String, Vec<StateResult>> = BTreeMap::new();
    for r in &summary.state_results {
        let task = r.app_category.clone().unwrap_or_else(|| UNCATEGORIZED_TASK.to_string());
        tasks.entry(task).or_default().push(r.clone());
    }
    for (task, rs) in tasks {
        let sub = summarize(dimension, rs, cfg)?;
        summary.per_task.insert(task, sub);
    }
    Ok(summary)
}

/// Summary statistics over already-judged state results.
pub fn summarize(dimension: Dimension, results: Vec<StateResult>, cfg: &EvalConfig) -> Result<EvaluationSummary, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let em = em_all(&results)?;
    let sr = success_rate(results.iter().flat_map(|r| r.verdicts.iter()))?;
    let n = results.len();
    let mut stage_fractions: BTreeMap<Stage, Rational> = BTreeMap::new();
    for stage in Stage::ALL {
        let count = results.iter().filter(|r| r.stage == stage).count();
        stage_fractions.insert(stage, Rational::ratio(count, n));
    }
    let bimodality = bimodality_summary(
        &results,
        &decimal(cfg.bimodality_low, "bimodality_low")?,
        &decimal(cfg.bimodality_high, "bimodality_high")?,
    )?;
    let histogram = histogram(&results, &decimal(cfg.histogram_bin_width, "histogram_bin_width")?)?;
    Ok(EvaluationSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        agent_id: None,
        dimension,
        n_states: n,
        n_instructions: results.iter().map(StateResult::m).sum(),
        em_all: em,
        sr,
        stage_fractions,
        bimodality,
        histogram,
        per_task: BTreeMap::new(),
        excluded_states: Vec::new(),
        state_results: results,
    })
}

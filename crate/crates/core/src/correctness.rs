//! Per-action correctness: the indicator that feeds every state metric.
//!
//! An action is correct only if its type matches the gold type. Pointer
//! actions then use the widget box (multi-widget) or a radius around the
//! reference gesture (uni-widget); scrolls compare direction; typed text is
//! scored with token F1; everything else is compared structurally.

use std::collections::HashMap;

use num_integer::Integer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Action, ActionKind, BBox, GoldTarget, Instruction, Point, Prediction, PredictionOutcome, ScrollDirection, Verdict,
    VerdictReason,
};
use crate::rational::Rational;

/// Which side of the F1 threshold counts as correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Direction {
    /// Correct iff F1 >= threshold.
    #[default]
    AtLeast,
    /// Correct iff F1 < threshold (the literal "below" reading).
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectnessConfig {
    /// Normalized Euclidean radius around a reference gesture.
    pub radius: f64,
    pub f1_threshold: f64,
    pub f1_direction: F1Direction,
    pub bbox_inclusive: bool,
}

impl Default for CorrectnessConfig {
    fn default() -> Self {
        CorrectnessConfig { radius: 0.14, f1_threshold: 0.5, f1_direction: F1Direction::AtLeast, bbox_inclusive: true }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("radius must be in (0, 1], got {0}")]
    Radius(f64),
    #[error("f1_threshold must be in [0, 1], got {0}")]
    F1Threshold(f64),
}

impl CorrectnessConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(ConfigError::Radius(self.radius));
        }
        if !(0.0..=1.0).contains(&self.f1_threshold) {
            return Err(ConfigError::F1Threshold(self.f1_threshold));
        }
        Ok(())
    }

    fn f1_passes(&self, f1: &Rational) -> bool {
        let threshold = exact(self.f1_threshold);
        match self.f1_direction {
            F1Direction::AtLeast => *f1 >= threshold,
            F1Direction::Below => *f1 < threshold,
        }
    }
}

fn exact(v: f64) -> Rational {
    Rational::from_decimal_f64(v).expect("finite coordinate")
}

pub fn point_in_bbox(p: Point, b: BBox, inclusive: bool) -> bool {
    if inclusive {
        b.x_min() <= p.x() && p.x() <= b.x_max() && b.y_min() <= p.y() && p.y() <= b.y_max()
    } else {
        b.x_min() < p.x() && p.x() < b.x_max() && b.y_min() < p.y() && p.y() < b.y_max()
    }
}

/// The decimal value of `x` as a count of 1e-18, when its shortest
/// decimal form has at most 18 fractional digits and fits.
fn fixed18(x: f64) -> Option<i128> {
    let s = format!("{x:e}");
    let (mantissa, exp) = s.split_once('e')?;
    let exp: i32 = exp.parse().ok()?;
    let frac_digits = mantissa.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
    let m: i128 = mantissa.replace('.', "").parse().ok()?;
    let shift = u32::try_from(18 + exp - frac_digits).ok()?;
    m.checked_mul(10i128.checked_pow(shift)?)
}

/// Squared distance in units of 1e-36, or `None` if it does not fit.
fn fixed_squared_distance(p: Point, q: Point) -> Option<i128> {
    let dx = fixed18(p.x())?.checked_sub(fixed18(q.x())?)?;
    let dy = fixed18(p.y())?.checked_sub(fixed18(q.y())?)?;
    dx.checked_mul(dx)?.checked_add(dy.checked_mul(dy)?)
}

/// Squared distance between two points, computed on their decimal values.
pub(crate) fn squared_distance(p: Point, q: Point) -> Rational {
    let dx = exact(p.x()) - exact(q.x());
    let dy = exact(p.y()) - exact(q.y());
    &dx * &dx + &dy * &dy
}

/// `(d / radius)^2` for the distance `d` between `p` and `q`, rounded once
/// from its exact value. `radius` must be positive.
pub(crate) fn squared_distance_ratio(p: Point, q: Point, radius: f64) -> f64 {
    if let (Some(d2), Some(r)) = (fixed_squared_distance(p, q), fixed18(radius)) {
        if let Some(r2) = r.checked_mul(r) {
            let g = d2.gcd(&r2).max(1);
            let (n, d) = (d2 / g, r2 / g);
            // both exact as f64, so the division rounds once
            if n < 1 << 53 && d < 1 << 53 {
                return n as f64 / d as f64;
            }
        }
    }
    let r = exact(radius);
    (squared_distance(p, q) / (&r * &r)).to_f64()
}

/// `true` iff the Euclidean distance is at most `radius`. Compared exactly
/// on decimal values, so `(0.5, 0.64)` is within `0.14` of `(0.5, 0.5)`.
pub fn within_radius(p: Point, reference: Point, radius: f64) -> bool {
    if radius.is_nan() || radius < 0.0 {
        return false;
    }
    if let (Some(d2), Some(r)) = (fixed_squared_distance(p, reference), fixed18(radius)) {
        if let Some(r2) = r.checked_mul(r) {
            return d2 <= r2;
        }
    }
    let r = exact(radius);
    squared_distance(p, reference) <= &r * &r
}

fn tokens(s: &str) -> Vec<String> {
    s.to_lowercase().split_whitespace().map(str::to_owned).collect()
}

/// Multiset token F1 over lowercase whitespace tokens. Both empty scores 1.
pub fn token_f1(pred: &str, gold: &str) -> Rational {
    let p = tokens(pred);
    let g = tokens(gold);
    if p.is_empty() && g.is_empty() {
        return Rational::one();
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    // 2PR/(P+R) with P = c/|p|, R = c/|g| reduces to 2c/(|p|+|g|)
    Rational::ratio(2 * common, p.len() + g.len())
}

pub fn scroll_match(pred: ScrollDirection, gold: ScrollDirection) -> bool {
    pred == gold
}

fn same_text_ci(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// Judges a parsed prediction against a gold target.
pub fn judge(pred: &Action, gold_action_type: ActionKind, gold: &GoldTarget, cfg: &CorrectnessConfig) -> VerdictReason {
    if pred.kind() != gold_action_type {
        return VerdictReason::WrongType;
    }
    match (pred, gold) {
        (Action::Click { target } | Action::LongPress { target }, GoldTarget::WidgetBox { bbox }) => {
            if point_in_bbox(*target, *bbox, cfg.bbox_inclusive) {
                VerdictReason::Matched
            } else {
                VerdictReason::OutOfBbox
            }
        }
        (Action::Click { target } | Action::LongPress { target }, GoldTarget::ReferencePoint { point }) => {
            if within_radius(*target, *point, cfg.radius) {
                VerdictReason::Matched
            } else {
                VerdictReason::OutOfRadius
            }
        }
        (_, GoldTarget::ExactAction { action: gold_action }) => judge_exact(pred, gold_action, cfg),
        // a pointer gold paired with a non-pointer kind is rejected by Instruction::new
        _ => VerdictReason::WrongType,
    }
}

fn judge_exact(pred: &Action, gold: &Action, cfg: &CorrectnessConfig) -> VerdictReason {
    let ok = |b: bool, miss: VerdictReason| if b { VerdictReason::Matched } else { miss };
    match (pred, gold) {
        (Action::TypeText { text: p }, Action::TypeText { text: g }) => {
            ok(cfg.f1_passes(&token_f1(p, g)), VerdictReason::LowF1)
        }
        (Action::Scroll { direction: p }, Action::Scroll { direction: g }) => {
            ok(scroll_match(*p, *g), VerdictReason::WrongDirection)
        }
        (Action::OpenApp { app_name: p }, Action::OpenApp { app_name: g }) => {
            ok(same_text_ci(p, g), VerdictReason::WrongArgument)
        }
        (Action::Status { goal_status: p }, Action::Status { goal_status: g }) => {
            ok(p == g, VerdictReason::WrongArgument)
        }
        (Action::NavigateHome, Action::NavigateHome)
        | (Action::NavigateBack, Action::NavigateBack)
        | (Action::Wait, Action::Wait) => VerdictReason::Matched,
        (Action::Click { target: p } | Action::LongPress { target: p }, Action::Click { target: g } | Action::LongPress { target: g }) => {
            ok(within_radius(*p, *g, cfg.radius), VerdictReason::OutOfRadius)
        }
        _ => VerdictReason::WrongType,
    }
}

/// Verdict for one instruction given the agent's prediction, if any.
pub fn judge_instruction(instruction: &Instruction, prediction: Option<&Prediction>, cfg: &CorrectnessConfig) -> Verdict {
    let reason = match prediction.map(|p| &p.outcome) {
        None | Some(PredictionOutcome::Missing(_)) => VerdictReason::MissingPrediction,
        Some(PredictionOutcome::ParseError(_)) => VerdictReason::ParseFailure,
        Some(PredictionOutcome::Parsed(action)) => {
            judge(action, instruction.gold_action_type(), instruction.gold(), cfg)
        }
    };
    Verdict::new(instruction.instruction_id(), reason)
}

//! Domain types shared by every stage of the harness.
//!
//! Coordinates are normalized to `[0, 1]` per axis. Values are immutable once
//! built; constructors enforce the invariants that must never be violated
//! (coordinate ranges, gold/dimension pairing) while whole-group consistency
//! is reported as data by [`validate_state_group`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::CohesionReport;
use crate::grammar::RawActionRecord;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("coordinate ({x}, {y}) outside the normalized unit square")]
    PointOutOfRange { x: f64, y: f64 },
    #[error("bounding box ({x_min}, {y_min}, {x_max}, {y_max}) is inverted or outside [0,1]")]
    InvalidBBox { x_min: f64, y_min: f64, x_max: f64, y_max: f64 },
    #[error("instruction {instruction_id}: {gold} gold cannot be used with the {dimension} dimension")]
    DimensionGoldMismatch { instruction_id: String, gold: &'static str, dimension: Dimension },
    #[error("instruction {instruction_id}: gold action type {expected} does not fit gold target ({found})")]
    GoldKindMismatch { instruction_id: String, expected: ActionKind, found: String },
}

fn unit(v: f64) -> bool {
    v.is_finite() && (0.0..=1.0).contains(&v)
}

// -0.0 would serialize as "-0"; collapse it.
fn canonical_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct Point {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    x: f64,
    y: f64,
}

impl TryFrom<RawPoint> for Point {
    type Error = ModelError;
    fn try_from(r: RawPoint) -> Result<Self, Self::Error> {
        Point::new(r.x, r.y)
    }
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self, ModelError> {
        if unit(x) && unit(y) {
            Ok(Point { x: canonical_zero(x), y: canonical_zero(y) })
        } else {
            Err(ModelError::PointOutOfRange { x, y })
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, ModelError> {
        if [x_min, y_min, x_max, y_max].into_iter().all(unit) && x_min <= x_max && y_min <= y_max {
            Ok(BBox {
                x_min: canonical_zero(x_min),
                y_min: canonical_zero(y_min),
                x_max: canonical_zero(x_max),
                y_max: canonical_zero(y_max),
            })
        } else {
            Err(ModelError::InvalidBBox { x_min, y_min, x_max, y_max })
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn center(&self) -> Point {
        // exact decimal midpoint, so (0.2, 0.4) centers on 0.3 rather than 0.30000000000000004
        Point { x: decimal_midpoint(self.x_min, self.x_max), y: decimal_midpoint(self.y_min, self.y_max) }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

fn decimal_midpoint(a: f64, b: f64) -> f64 {
    match (Rational::from_decimal_f64(a), Rational::from_decimal_f64(b)) {
        (Some(a), Some(b)) => ((a + b) / Rational::from_integer(2)).to_f64(),
        _ => (a + b) / 2.0,
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = ModelError;
    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Widget {
    pub index: u32,
    pub bbox: BBox,
    pub clickable: bool,
    pub visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiState {
    pub state_id: String,
    pub screenshot_ref: String,
    pub widgets: Vec<Widget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_tree_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<u32>,
}

impl UiState {
    pub fn widget(&self, index: u32) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.index == index)
    }
}

/// Stable identifier for the screen at `step_index` of `episode_id`.
pub fn state_id_for(episode_id: &str, step_index: u32) -> String {
    let mut hasher = Sha256::new();
    hasher.update(episode_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(step_index.to_le_bytes());
    let digest = hasher.finalize();
    format!("s-{}", hex::encode(&digest[..8]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScrollDirection {
    Up,
    Down,
    Left,
    Right,
}

impl ScrollDirection {
    pub const ALL: [ScrollDirection; 4] =
        [ScrollDirection::Up, ScrollDirection::Down, ScrollDirection::Left, ScrollDirection::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
            ScrollDirection::Left => "left",
            ScrollDirection::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalStatus {
    Successful,
    Infeasible,
}

impl GoalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GoalStatus::Successful => "successful",
            GoalStatus::Infeasible => "infeasible",
        }
    }
}

/// The variant tag of an [`Action`], used for gold types and type gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    LongPress,
    #[serde(rename = "type")]
    TypeText,
    Scroll,
    NavigateHome,
    NavigateBack,
    OpenApp,
    Wait,
    Status,
}

impl ActionKind {
    pub const ALL: [ActionKind; 9] = [
        ActionKind::Click,
        ActionKind::LongPress,
        ActionKind::TypeText,
        ActionKind::Scroll,
        ActionKind::NavigateHome,
        ActionKind::NavigateBack,
        ActionKind::OpenApp,
        ActionKind::Wait,
        ActionKind::Status,
    ];

    /// Canonical `action_type` value.
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::LongPress => "long_press",
            ActionKind::TypeText => "type",
            ActionKind::Scroll => "scroll",
            ActionKind::NavigateHome => "navigate_home",
            ActionKind::NavigateBack => "navigate_back",
            ActionKind::OpenApp => "open_app",
            ActionKind::Wait => "wait",
            ActionKind::Status => "status",
        }
    }

    pub fn is_pointer(self) -> bool {
        matches!(self, ActionKind::Click | ActionKind::LongPress)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One GUI action. Serialized through the canonical action record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawActionRecord", try_from = "RawActionRecord")]
pub enum Action {
    Click { target: Point },
    LongPress { target: Point },
    TypeText { text: String },
    Scroll { direction: ScrollDirection },
    NavigateHome,
    NavigateBack,
    OpenApp { app_name: String },
    Wait,
    Status { goal_status: GoalStatus },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Click { .. } => ActionKind::Click,
            Action::LongPress { .. } => ActionKind::LongPress,
            Action::TypeText { .. } => ActionKind::TypeText,
            Action::Scroll { .. } => ActionKind::Scroll,
            Action::NavigateHome => ActionKind::NavigateHome,
            Action::NavigateBack => ActionKind::NavigateBack,
            Action::OpenApp { .. } => ActionKind::OpenApp,
            Action::Wait => ActionKind::Wait,
            Action::Status { .. } => ActionKind::Status,
        }
    }

    pub fn target(&self) -> Option<Point> {
        match self {
            Action::Click { target } | Action::LongPress { target } => Some(*target),
            _ => None,
        }
    }

    /// Pointer action of `kind` at `target`; `None` if `kind` is not a pointer kind.
    pub fn pointer(kind: ActionKind, target: Point) -> Option<Action> {
        match kind {
            ActionKind::Click => Some(Action::Click { target }),
            ActionKind::LongPress => Some(Action::LongPress { target }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Mwam,
    Uwiu,
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Mwam => "mwam",
            Dimension::Uwiu => "uwiu",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Mwam => "MWAM",
            Dimension::Uwiu => "UWIU",
        })
    }
}

impl std::str::FromStr for Dimension {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mwam" => Ok(Dimension::Mwam),
            "uwiu" => Ok(Dimension::Uwiu),
            other => Err(format!("unknown dimension `{other}` (expected mwam or uwiu)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoldTarget {
    /// Multi-widget gold: the target widget's box.
    WidgetBox { bbox: BBox },
    /// Uni-widget gold: the reference gesture location.
    ReferencePoint { point: Point },
    /// Gold for every non-pointer action.
    ExactAction { action: Action },
}

impl GoldTarget {
    fn label(&self) -> &'static str {
        match self {
            GoldTarget::WidgetBox { .. } => "widget_box",
            GoldTarget::ReferencePoint { .. } => "reference_point",
            GoldTarget::ExactAction { .. } => "exact_action",
        }
    }

    /// True when this gold variant may appear under `dimension`.
    pub fn allowed_in(&self, dimension: Dimension) -> bool {
        match self {
            GoldTarget::WidgetBox { .. } => dimension == Dimension::Mwam,
            GoldTarget::ReferencePoint { .. } => dimension == Dimension::Uwiu,
            GoldTarget::ExactAction { .. } => true,
        }
    }
}

/// An instruction bound to one state with its gold target.
///
/// Fields are private: [`Instruction::new`] is the only way in, so a gold
/// that contradicts its dimension or gold action type is unrepresentable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstructionRecord", into = "InstructionRecord")]
pub struct Instruction {
    instruction_id: String,
    text: String,
    low_level: Option<String>,
    dimension: Dimension,
    gold: GoldTarget,
    gold_action_type: ActionKind,
    state_id: String,
    task_category: Option<String>,
    next_state_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstructionRecord {
    instruction_id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    low_level: Option<String>,
    dimension: Dimension,
    gold: GoldTarget,
    gold_action_type: ActionKind,
    state_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    next_state_id: Option<String>,
}

impl TryFrom<InstructionRecord> for Instruction {
    type Error = ModelError;
    fn try_from(r: InstructionRecord) -> Result<Self, Self::Error> {
        Ok(Instruction::new(r.instruction_id, r.text, r.state_id, r.dimension, r.gold, r.gold_action_type)?
            .with_low_level(r.low_level)
            .with_task_category(r.task_category)
            .with_next_state(r.next_state_id))
    }
}

impl From<Instruction> for InstructionRecord {
    fn from(i: Instruction) -> Self {
        InstructionRecord {
            instruction_id: i.instruction_id,
            text: i.text,
            low_level: i.low_level,
            dimension: i.dimension,
            gold: i.gold,
            gold_action_type: i.gold_action_type,
            state_id: i.state_id,
            task_category: i.task_category,
            next_state_id: i.next_state_id,
        }
    }
}

impl Instruction {
    pub fn new(
        instruction_id: impl Into<String>,
        text: impl Into<String>,
        state_id: impl Into<String>,
        dimension: Dimension,
        gold: GoldTarget,
        gold_action_type: ActionKind,
    ) -> Result<Self, ModelError> {
        let instruction_id = instruction_id.into();
        if !gold.allowed_in(dimension) {
            return Err(ModelError::DimensionGoldMismatch { instruction_id, gold: gold.label(), dimension });
        }
        let consistent = match &gold {
            GoldTarget::WidgetBox { .. } | GoldTarget::ReferencePoint { .. } => gold_action_type.is_pointer(),
            GoldTarget::ExactAction { action } => !action.kind().is_pointer() && action.kind() == gold_action_type,
        };
        if !consistent {
            let found = match &gold {
                GoldTarget::ExactAction { action } => format!("exact {}", action.kind()),
                other => other.label().to_string(),
            };
            return Err(ModelError::GoldKindMismatch { instruction_id, expected: gold_action_type, found });
        }
        Ok(Instruction {
            instruction_id,
            text: text.into(),
            low_level: None,
            dimension,
            gold,
            gold_action_type,
            state_id: state_id.into(),
            task_category: None,
            next_state_id: None,
        })
    }

    pub fn with_low_level(mut self, low_level: Option<String>) -> Self {
        self.low_level = low_level;
        self
    }

    pub fn with_task_category(mut self, category: Option<String>) -> Self {
        self.task_category = category;
        self
    }

    /// Records the successor screen an instruction was generated from (uni-widget expansion).
    pub fn with_next_state(mut self, next_state_id: Option<String>) -> Self {
        self.next_state_id = next_state_id;
        self
    }

    /// Moves the instruction (and its successor link) onto other state ids.
    pub fn rebind(mut self, state_id: impl Into<String>, next_state_id: Option<String>) -> Self {
        self.state_id = state_id.into();
        self.next_state_id = next_state_id;
        self
    }

    pub fn instruction_id(&self) -> &str {
        &self.instruction_id
    }
    pub fn text(&self) -> &str {
        &self.text
    }
    pub fn low_level(&self) -> Option<&str> {
        self.low_level.as_deref()
    }
    pub fn dimension(&self) -> Dimension {
        self.dimension
    }
    pub fn gold(&self) -> &GoldTarget {
        &self.gold
    }
    pub fn gold_action_type(&self) -> ActionKind {
        self.gold_action_type
    }
    pub fn state_id(&self) -> &str {
        &self.state_id
    }
    pub fn task_category(&self) -> Option<&str> {
        self.task_category.as_deref()
    }
    pub fn next_state_id(&self) -> Option<&str> {
        self.next_state_id.as_deref()
    }

    /// A concrete action that satisfies the gold: box center for widget
    /// golds, the reference point for uni-widget golds.
    pub fn gold_action(&self) -> Action {
        match &self.gold {
            GoldTarget::WidgetBox { bbox } => {
                Action::pointer(self.gold_action_type, bbox.center()).expect("pointer gold kind")
            }
            GoldTarget::ReferencePoint { point } => {
                Action::pointer(self.gold_action_type, *point).expect("pointer gold kind")
            }
            GoldTarget::ExactAction { action } => action.clone(),
        }
    }
}

/// A state plus the instructions evaluated on it for one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGroup {
    pub state: UiState,
    pub dimension: Dimension,
    pub instructions: Vec<Instruction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyGroup,
    MismatchedStateId,
    DimensionMismatch,
    DimensionGoldMismatch,
    DuplicateInstructionId,
    DuplicateWidgetIndex,
    NonContiguousWidgetIndices,
    UnannotatedWidget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl Violation {
    fn new(kind: ViolationKind, detail: impl Into<String>) -> Self {
        Violation { kind, detail: detail.into() }
    }
}

/// Checks every [`StateGroup`] invariant. Empty result means the group is valid.
pub fn validate_state_group(group: &StateGroup) -> Vec<Violation> {
    let mut out = Vec::new();
    let state = &group.state;
    if group.instructions.is_empty() {
        out.push(Violation::new(ViolationKind::EmptyGroup, format!("state {} has no instructions", state.state_id)));
    }
    let mut seen_ids = BTreeSet::new();
    for ins in &group.instructions {
        let id = ins.instruction_id();
        if !seen_ids.insert(id) {
            out.push(Violation::new(ViolationKind::DuplicateInstructionId, id));
        }
        if ins.state_id() != state.state_id {
            out.push(Violation::new(
                ViolationKind::MismatchedStateId,
                format!("{id}: state {} != {}", ins.state_id(), state.state_id),
            ));
        }
        if !ins.gold().allowed_in(group.dimension) {
            out.push(Violation::new(
                ViolationKind::DimensionGoldMismatch,
                format!("{id}: {} gold in {} group", ins.gold().label(), group.dimension),
            ));
        } else if ins.dimension() != group.dimension {
            out.push(Violation::new(
                ViolationKind::DimensionMismatch,
                format!("{id}: {} instruction in {} group", ins.dimension(), group.dimension),
            ));
        }
    }
    out.extend(widget_violations(state));
    out
}

/// Widget-index and annotation checks for an annotated state.
pub fn widget_violations(state: &UiState) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for w in &state.widgets {
        *counts.entry(w.index).or_default() += 1;
        if !(w.clickable && w.visible) {
            out.push(Violation::new(ViolationKind::UnannotatedWidget, format!("widget {}", w.index)));
        }
    }
    for (idx, n) in &counts {
        if *n > 1 {
            out.push(Violation::new(ViolationKind::DuplicateWidgetIndex, format!("widget {idx} appears {n} times")));
        }
    }
    let n = state.widgets.len() as u32;
    if counts.keys().copied().ne(1..=n) && counts.values().all(|c| *c == 1) {
        out.push(Violation::new(
            ViolationKind::NonContiguousWidgetIndices,
            format!("indices of {} are not 1..{n}", state.state_id),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionOutcome {
    Parsed(Action),
    /// The agent answered but no valid action could be read from it.
    ParseError(String),
    /// No answer at all (timeout, adapter failure, absent from the file).
    Missing(String),
}

/// An agent's answer to one instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub instruction_id: String,
    pub agent_id: String,
    pub raw: Option<String>,
    pub outcome: PredictionOutcome,
}

impl Prediction {
    pub fn parsed(&self) -> Option<&Action> {
        match &self.outcome {
            PredictionOutcome::Parsed(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    Matched,
    WrongType,
    OutOfBbox,
    OutOfRadius,
    WrongDirection,
    LowF1,
    /// Same parameterless-or-exact action type but a different argument
    /// (app name, goal status).
    WrongArgument,
    ParseFailure,
    MissingPrediction,
}

impl VerdictReason {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictReason::Matched => "matched",
            VerdictReason::WrongType => "wrong_type",
            VerdictReason::OutOfBbox => "out_of_bbox",
            VerdictReason::OutOfRadius => "out_of_radius",
            VerdictReason::WrongDirection => "wrong_direction",
            VerdictReason::LowF1 => "low_f1",
            VerdictReason::WrongArgument => "wrong_argument",
            VerdictReason::ParseFailure => "parse_failure",
            VerdictReason::MissingPrediction => "missing_prediction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VerdictRecord")]
pub struct Verdict {
    instruction_id: String,
    correct: bool,
    reason: VerdictReason,
}

#[derive(Deserialize)]
struct VerdictRecord {
    instruction_id: String,
    correct: bool,
    reason: VerdictReason,
}

impl TryFrom<VerdictRecord> for Verdict {
    type Error = String;
    fn try_from(r: VerdictRecord) -> Result<Self, Self::Error> {
        if r.correct != (r.reason == VerdictReason::Matched) {
            return Err(format!("verdict {}: correct={} contradicts reason {}", r.instruction_id, r.correct, r.reason.as_str()));
        }
        Ok(Verdict::new(r.instruction_id, r.reason))
    }
}

impl Verdict {
    pub fn new(instruction_id: impl Into<String>, reason: VerdictReason) -> Self {
        Verdict { instruction_id: instruction_id.into(), correct: reason == VerdictReason::Matched, reason }
    }

    pub fn instruction_id(&self) -> &str {
        &self.instruction_id
    }
    pub fn correct(&self) -> bool {
        self.correct
    }
    pub fn reason(&self) -> VerdictReason {
        self.reason
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "LS")]
    Learning,
    #[serde(rename = "IS")]
    Improvement,
    #[serde(rename = "PS")]
    Proficient,
    #[serde(rename = "ES")]
    Expert,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Learning, Stage::Improvement, Stage::Proficient, Stage::Expert];

    pub fn abbrev(self) -> &'static str {
        match self {
            Stage::Learning => "LS",
            Stage::Improvement => "IS",
            Stage::Proficient => "PS",
            Stage::Expert => "ES",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateResult {
    pub state_id: String,
    pub dimension: Dimension,
    pub verdicts: Vec<Verdict>,
    pub em_state: Rational,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohesion: Option<CohesionReport>,
}

impl StateResult {
    pub fn m(&self) -> usize {
        self.verdicts.len()
    }

    pub fn n_correct(&self) -> usize {
        self.verdicts.iter().filter(|v| v.correct()).count()
    }

    pub fn error_cohesion(&self) -> Option<f64> {
        self.cohesion.as_ref().map(|c| c.cohesion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub from: String,
    pub instruction_id: String,
    pub action: Action,
    pub to: String,
}

/// States as nodes, `(instruction, action)` transitions as edges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTree {
    pub nodes: BTreeSet<String>,
    pub edges: Vec<TreeEdge>,
}

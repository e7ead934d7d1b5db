//! Action record grammar: parsing agent output into [`Action`]s and
//! rendering actions back to canonical records.
//!
//! A record is a JSON object carrying `action_type` plus the fields of that
//! action (see `docs/action-grammar.md`). Records may be embedded in prose,
//! written with single quotes, or refer to widgets by annotation index; the
//! parser takes the first well-formed record it finds.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{Action, ActionKind, GoalStatus, ModelError, Point, ScrollDirection, UiState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrammarError {
    #[error("no action record found in agent output")]
    NoActionFound,
    #[error("unknown action type `{0}`")]
    UnknownActionType(String),
    #[error("`{action_type}` action is missing field `{field}`")]
    MissingField { action_type: &'static str, field: &'static str },
    #[error("widget {index} cannot be resolved: {why}")]
    UnresolvableWidget { index: i64, why: &'static str },
    #[error("unknown scroll direction `{0}`")]
    UnknownDirection(String),
    #[error("unknown goal status `{0}`")]
    UnknownGoalStatus(String),
    #[error("type action has empty text")]
    EmptyText,
    #[error("field `{field}` has an unusable value: {value}")]
    BadFieldValue { field: &'static str, value: String },
    #[error(transparent)]
    Coordinate(#[from] ModelError),
}

/// How point-emitting agents express coordinates. Declared per agent;
/// never inferred from the values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum CoordinateSpace {
    #[default]
    Normalized,
    Pixels { width: u32, height: u32 },
}

impl CoordinateSpace {
    fn normalize(self, x: f64, y: f64) -> Result<Point, ModelError> {
        match self {
            CoordinateSpace::Normalized => Point::new(x, y),
            CoordinateSpace::Pixels { width, height } => {
                if width == 0 || height == 0 {
                    return Err(ModelError::PointOutOfRange { x, y });
                }
                Point::new(x / f64::from(width), y / f64::from(height))
            }
        }
    }
}

/// The key-value form of an action, mirroring the generation prompt schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawActionRecord {
    pub action_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ui: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_status: Option<String>,
}

impl RawActionRecord {
    /// Reads a record from a loosely typed JSON object: numbers may be
    /// quoted, coordinates may come as `coordinate: [x, y]`.
    pub fn from_json(obj: &Map<String, Value>) -> Result<Self, GrammarError> {
        let action_type = match obj.get("action_type") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            _ => return Err(GrammarError::NoActionFound),
        };
        let mut rec = RawActionRecord {
            action_type,
            ui: number_field(obj, "ui")?.map(|v| v as i64),
            x: number_field(obj, "x")?,
            y: number_field(obj, "y")?,
            text: string_field(obj, "text"),
            direction: string_field(obj, "direction"),
            app_name: string_field(obj, "app_name"),
            goal_status: string_field(obj, "goal_status"),
        };
        if rec.x.is_none() && rec.y.is_none() {
            for key in ["coordinate", "coordinates", "point"] {
                if let Some(Value::Array(items)) = obj.get(key) {
                    if let [a, b] = items.as_slice() {
                        rec.x = as_number(a);
                        rec.y = as_number(b);
                        if rec.x.is_none() || rec.y.is_none() {
                            return Err(GrammarError::BadFieldValue { field: "coordinate", value: Value::Array(items.clone()).to_string() });
                        }
                        break;
                    }
                }
            }
        }
        Ok(rec)
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn number_field(obj: &Map<String, Value>, key: &'static str) -> Result<Option<f64>, GrammarError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => as_number(v)
            .filter(|n| n.is_finite())
            .map(Some)
            .ok_or_else(|| GrammarError::BadFieldValue { field: key, value: v.to_string() }),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

/// Maps an `action_type` spelling onto its kind.
///
/// Frozen alias table (case-insensitive; spaces and hyphens read as `_`):
///
/// | kind | accepted spellings |
/// |---|---|
/// | click | `click`, `tap` |
/// | long_press | `long_press`, `longpress`, `long_click` |
/// | type | `type`, `input_text`, `type_text`, `input` |
/// | scroll | `scroll` |
/// | navigate_home | `navigate_home`, `press_home`, `home` |
/// | navigate_back | `navigate_back`, `press_back`, `back` |
/// | open_app | `open_app`, `launch_app` |
/// | wait | `wait` |
/// | status | `status` |
pub fn action_kind_from_name(name: &str) -> Option<ActionKind> {
    let key: String = name
        .trim()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_lowercase() })
        .collect();
    let kind = match key.as_str() {
        "click" | "tap" => ActionKind::Click,
        "long_press" | "longpress" | "long_click" => ActionKind::LongPress,
        "type" | "input_text" | "type_text" | "input" => ActionKind::TypeText,
        "scroll" => ActionKind::Scroll,
        "navigate_home" | "press_home" | "home" => ActionKind::NavigateHome,
        "navigate_back" | "press_back" | "back" => ActionKind::NavigateBack,
        "open_app" | "launch_app" => ActionKind::OpenApp,
        "wait" => ActionKind::Wait,
        "status" => ActionKind::Status,
        _ => return None,
    };
    Some(kind)
}

/// Case-insensitive direction parsing; accepts a `scroll` prefix
/// (`scroll_down`, `Scroll Up`).
pub fn normalize_direction(s: &str) -> Result<ScrollDirection, GrammarError> {
    let lower = s.trim().to_ascii_lowercase();
    let bare = lower
        .strip_prefix("scroll")
        .map(|rest| rest.trim_start_matches(['_', '-', ' ']))
        .unwrap_or(&lower);
    match bare {
        "up" => Ok(ScrollDirection::Up),
        "down" => Ok(ScrollDirection::Down),
        "left" => Ok(ScrollDirection::Left),
        "right" => Ok(ScrollDirection::Right),
        _ => Err(GrammarError::UnknownDirection(s.to_string())),
    }
}

fn normalize_goal_status(s: &str) -> Result<GoalStatus, GrammarError> {
    match s.trim().trim_matches('"').to_ascii_lowercase().as_str() {
        "successful" | "success" | "complete" | "completed" => Ok(GoalStatus::Successful),
        "infeasible" | "impossible" => Ok(GoalStatus::Infeasible),
        _ => Err(GrammarError::UnknownGoalStatus(s.to_string())),
    }
}

/// Converts a record into an action. `context` resolves `ui` indices to
/// widget centers; explicit coordinates take precedence over `ui`.
pub fn action_from_record(
    rec: &RawActionRecord,
    context: Option<&UiState>,
    space: CoordinateSpace,
) -> Result<Action, GrammarError> {
    let kind = action_kind_from_name(&rec.action_type)
        .ok_or_else(|| GrammarError::UnknownActionType(rec.action_type.clone()))?;
    let name = kind.as_str();
    Ok(match kind {
        ActionKind::Click | ActionKind::LongPress => {
            let target = match (rec.x, rec.y, rec.ui) {
                (Some(x), Some(y), _) => space.normalize(x, y)?,
                (_, _, Some(index)) => resolve_widget(index, context)?,
                (Some(_), None, None) => return Err(GrammarError::MissingField { action_type: name, field: "y" }),
                (None, Some(_), None) => return Err(GrammarError::MissingField { action_type: name, field: "x" }),
                (None, None, None) => return Err(GrammarError::MissingField { action_type: name, field: "ui" }),
            };
            Action::pointer(kind, target).expect("pointer kind")
        }
        ActionKind::TypeText => {
            let text = rec.text.clone().ok_or(GrammarError::MissingField { action_type: name, field: "text" })?;
            if text.trim().is_empty() {
                return Err(GrammarError::EmptyText);
            }
            Action::TypeText { text }
        }
        ActionKind::Scroll => {
            let dir = rec.direction.as_deref().ok_or(GrammarError::MissingField { action_type: name, field: "direction" })?;
            Action::Scroll { direction: normalize_direction(dir)? }
        }
        ActionKind::OpenApp => {
            let app = rec.app_name.clone().ok_or(GrammarError::MissingField { action_type: name, field: "app_name" })?;
            if app.trim().is_empty() {
                return Err(GrammarError::MissingField { action_type: name, field: "app_name" });
            }
            Action::OpenApp { app_name: app }
        }
        ActionKind::Status => {
            let status =
                rec.goal_status.as_deref().ok_or(GrammarError::MissingField { action_type: name, field: "goal_status" })?;
            Action::Status { goal_status: normalize_goal_status(status)? }
        }
        ActionKind::NavigateHome => Action::NavigateHome,
        ActionKind::NavigateBack => Action::NavigateBack,
        ActionKind::Wait => Action::Wait,
    })
}

fn resolve_widget(index: i64, context: Option<&UiState>) -> Result<Point, GrammarError> {
    let state = context.ok_or(GrammarError::UnresolvableWidget { index, why: "no screen context" })?;
    let idx = u32::try_from(index).map_err(|_| GrammarError::UnresolvableWidget { index, why: "negative index" })?;
    state
        .widget(idx)
        .map(|w| w.bbox.center())
        .ok_or(GrammarError::UnresolvableWidget { index, why: "no such widget on this screen" })
}

/// Finds the first JSON object in `raw` that has `key` at its top level.
///
/// Tries each `{` in order with a streaming parser, so surrounding prose and
/// trailing text are ignored. If nothing strict is found, retries once with
/// single quotes read as double quotes.
pub fn extract_object(raw: &str, key: &str) -> Option<Map<String, Value>> {
    find_object(raw, key).or_else(|| {
        if raw.contains('\'') {
            let requoted = raw.replace("''", "\"").replace('\'', "\"");
            find_object(&requoted, key)
        } else {
            None
        }
    })
}

fn find_object(raw: &str, key: &str) -> Option<Map<String, Value>> {
    let needle = format!("\"{key}\"");
    // no object can start after the last mention of the key
    let limit = raw.rfind(&needle)?;
    for (start, _) in raw.match_indices('{') {
        if start > limit {
            break;
        }
        let mut de = serde_json::Deserializer::from_str(&raw[start..]);
        if let Ok(Value::Object(map)) = Value::deserialize(&mut de) {
            if map.contains_key(key) {
                return Some(map);
            }
        }
    }
    None
}

/// Parses free-form agent output into an action, assuming normalized coordinates.
pub fn parse_action(raw: &str, context: Option<&UiState>) -> Result<Action, GrammarError> {
    parse_action_in(raw, context, CoordinateSpace::Normalized)
}

pub fn parse_action_in(raw: &str, context: Option<&UiState>, space: CoordinateSpace) -> Result<Action, GrammarError> {
    let obj = extract_object(raw, "action_type").ok_or(GrammarError::NoActionFound)?;
    let rec = RawActionRecord::from_json(&obj)?;
    action_from_record(&rec, context, space)
}

/// Canonical single-line record, e.g. `{"action_type": "open_app", "app_name": "Gmail"}`.
pub fn serialize_action(action: &Action) -> String {
    let rec = RawActionRecord::from(action.clone());
    let mut parts = vec![format!("\"action_type\": {}", json_str(&rec.action_type))];
    if let (Some(x), Some(y)) = (rec.x, rec.y) {
        parts.push(format!("\"x\": {x}"));
        parts.push(format!("\"y\": {y}"));
    }
    for (key, value) in [
        ("text", &rec.text),
        ("direction", &rec.direction),
        ("app_name", &rec.app_name),
        ("goal_status", &rec.goal_status),
    ] {
        if let Some(v) = value {
            parts.push(format!("\"{key}\": {}", json_str(v)));
        }
    }
    format!("{{{}}}", parts.join(", "))
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

impl From<Action> for RawActionRecord {
    fn from(action: Action) -> Self {
        let mut rec = RawActionRecord { action_type: action.kind().as_str().to_string(), ..Default::default() };
        match action {
            Action::Click { target } | Action::LongPress { target } => {
                rec.x = Some(target.x());
                rec.y = Some(target.y());
            }
            Action::TypeText { text } => rec.text = Some(text),
            Action::Scroll { direction } => rec.direction = Some(direction.as_str().to_string()),
            Action::OpenApp { app_name } => rec.app_name = Some(app_name),
            Action::Status { goal_status } => rec.goal_status = Some(goal_status.as_str().to_string()),
            Action::NavigateHome | Action::NavigateBack | Action::Wait => {}
        }
        rec
    }
}

impl TryFrom<RawActionRecord> for Action {
    type Error = GrammarError;
    fn try_from(rec: RawActionRecord) -> Result<Self, Self::Error> {
        action_from_record(&rec, None, CoordinateSpace::Normalized)
    }
}

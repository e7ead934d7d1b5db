//! The five generation prompts, shipped verbatim under `assets/prompts/`,
//! and the code that fills them in and reads the replies.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::grammar::{extract_object, serialize_action};
use crate::model::{Action, ActionKind, UiState};

/// Bumped whenever a template or its rendering changes; part of every cache key.
pub const PROMPT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ConstructInstructions,
    GoldenAction,
    VerifyActionLow,
    VerifyLowHigh,
    ClassifyTask,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::ConstructInstructions,
        TemplateId::GoldenAction,
        TemplateId::VerifyActionLow,
        TemplateId::VerifyLowHigh,
        TemplateId::ClassifyTask,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::ConstructInstructions => "construct_instructions",
            TemplateId::GoldenAction => "golden_action",
            TemplateId::VerifyActionLow => "verify_action_low",
            TemplateId::VerifyLowHigh => "verify_low_high",
            TemplateId::ClassifyTask => "classify_task",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::ConstructInstructions => include_str!("../../assets/prompts/construct_instructions.txt"),
            TemplateId::GoldenAction => include_str!("../../assets/prompts/golden_action.txt"),
            TemplateId::VerifyActionLow => include_str!("../../assets/prompts/verify_action_low.txt"),
            TemplateId::VerifyLowHigh => include_str!("../../assets/prompts/verify_low_high.txt"),
            TemplateId::ClassifyTask => include_str!("../../assets/prompts/classify_task.txt"),
        }
    }
}

/// The upper-case action names used inside the prompts.
pub fn prompt_action_name(kind: ActionKind) -> &'static str {
    match kind {
        ActionKind::Click => "CLICK",
        ActionKind::LongPress => "LONG_PRESS",
        ActionKind::TypeText => "TYPE",
        ActionKind::Scroll => "SCROLL",
        ActionKind::NavigateBack => "PRESS_BACK",
        ActionKind::NavigateHome => "NAVIGATE_HOME",
        ActionKind::OpenApp => "OPEN_APP",
        ActionKind::Wait => "WAIT",
        ActionKind::Status => "STATUS",
    }
}

/// One line per numbered widget: index, label and normalized box.
pub fn screen_analysis(state: &UiState) -> String {
    let mut out = String::new();
    for w in &state.widgets {
        let label = w.text_label.as_deref().unwrap_or("(no text)");
        out.push_str(&format!(
            "UI {}: {} [{}, {}, {}, {}]\n",
            w.index,
            serde_json::to_string(label).expect("string"),
            w.bbox.x_min(),
            w.bbox.y_min(),
            w.bbox.x_max(),
            w.bbox.y_max()
        ));
    }
    out
}

pub fn render_construct(state: &UiState, hint: ActionKind, taken: &[u32]) -> String {
    let mut prompt = TemplateId::ConstructInstructions.text().to_string();
    prompt.push_str(&screen_analysis(state));
    prompt.push_str(&format!("\nCurrent action type: {}\n", prompt_action_name(hint)));
    if !taken.is_empty() {
        let used: Vec<String> = taken.iter().map(u32::to_string).collect();
        prompt.push_str(&format!("UI items already used: {}\n", used.join(", ")));
    }
    prompt
}

pub fn render_golden(low_level: &str, ui: u32) -> String {
    TemplateId::GoldenAction
        .text()
        .replacen("Low-level instruction:\n", &format!("Low-level instruction: {low_level}\n"), 1)
        .replacen("UI ID:\n", &format!("UI ID: {ui}\n"), 1)
}

pub fn render_verify_action_low(low_level: &str, action: &Action) -> String {
    format!(
        "{}\nLow-level instruction: {low_level}\nAction: {}\n",
        TemplateId::VerifyActionLow.text(),
        serialize_action(action)
    )
}

pub fn render_verify_low_high(high: &str, low: &str) -> String {
    format!("{}\nHigh-level instruction: {high}\nLow-level instruction: {low}\n", TemplateId::VerifyLowHigh.text())
}

pub fn render_classify(goal: &str) -> String {
    format!("{}{goal}\n", TemplateId::ClassifyTask.text())
}

/// Reads `key` from a reply that is supposed to be a dictionary but may be
/// prose-wrapped, single-quoted, or carry bare words (`"Correct": Yes`).
pub fn reply_field(raw: &str, key: &str) -> Option<Value> {
    if let Some(map) = extract_object(raw, key) {
        return map.get(key).cloned();
    }
    let needle = format!("\"{key}\"");
    let start = raw.find(&needle).or_else(|| raw.find(&format!("'{key}'")))? + needle.len();
    let rest = raw[start..].trim_start().strip_prefix(':')?.trim_start();
    let mut de = serde_json::Deserializer::from_str(rest).into_iter::<Value>();
    if let Some(Ok(v)) = de.next() {
        return Some(v);
    }
    let bare: String = rest
        .trim_start_matches(['\'', '"'])
        .chars()
        .take_while(|c| !matches!(c, ',' | '}' | '\n' | '"' | '\''))
        .collect();
    let bare = bare.trim();
    (!bare.is_empty()).then(|| Value::String(bare.to_string()))
}

pub fn reply_string(raw: &str, key: &str) -> Option<String> {
    match reply_field(raw, key)? {
        Value::String(s) => Some(s),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

pub fn reply_yes_no(raw: &str, key: &str) -> Option<bool> {
    let v = reply_field(raw, key)?;
    match v {
        Value::Bool(b) => Some(b),
        Value::String(s) => match s.trim().trim_end_matches('.').to_ascii_lowercase().as_str() {
            "yes" | "true" => Some(true),
            "no" | "false" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Renders a reply dictionary the way the prompts ask for it.
pub fn reply_dict(fields: &[(&str, Value)]) -> String {
    let mut lines = Vec::new();
    for (k, v) in fields {
        lines.push(format!("  {}: {}", serde_json::to_string(k).expect("key"), v));
    }
    format!("{{\n{}\n}}", lines.join(",\n"))
}

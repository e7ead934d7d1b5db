//! The instruction-generation client used by the expansion pipeline.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::backend::{BackendError, CompletionBackend, CompletionRequest};
use super::prompts::{self, TemplateId};
use crate::grammar::{extract_object, serialize_action, GrammarError, RawActionRecord};
use crate::model::{Action, ActionKind, UiState};

/// The app categories a trajectory can be classified into, in prompt order.
pub const APP_CATEGORIES: [&str; 29] = [
    "Shopping",
    "Productivity & Office",
    "Other",
    "Files",
    "Transportation",
    "Health & Fitness",
    "Recipes",
    "Flights",
    "Clock & Alarms",
    "Reminders",
    "Voice recording",
    "Education",
    "Books",
    "Email",
    "Calendar",
    "Notes & Todos",
    "Maps",
    "Videos",
    "News",
    "Meditation",
    "Weather",
    "Finance",
    "Art & crafts",
    "Gardening",
    "Contacts",
    "Drawing",
    "Music",
    "Real estate",
    "Messaging",
];

pub const FALLBACK_CATEGORY: &str = "Other";

/// Maps a free-form category answer onto the fixed list: case-insensitive,
/// tolerant of a leading list number such as `"14. Email"`.
pub fn coerce_category(answer: &str) -> Option<&'static str> {
    let trimmed = answer.trim().trim_matches(['"', '\'', '.']).trim();
    let without_number = match trimmed.split_once('.') {
        Some((n, rest)) if !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()) => rest.trim(),
        _ => trimmed,
    };
    APP_CATEGORIES.iter().copied().find(|c| c.eq_ignore_ascii_case(without_number))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{template} reply is unusable: {message}")]
    BadReply { template: &'static str, message: String },
}

impl ClientError {
    fn bad(template: TemplateId, message: impl Into<String>) -> Self {
        ClientError::BadReply { template: template.as_str(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedInstruction {
    pub sub_instruction: String,
    pub analysis: String,
    pub high_level_instruction: String,
    /// Widget number as answered; may be out of range and is validated by the caller.
    pub ui_item: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub yes: bool,
    pub analysis: String,
}

/// One operation per generation prompt. Implementations are interchangeable.
pub trait GeneratorClient: Send + Sync {
    /// Proposes one instruction on `state` for an action of kind `hint`,
    /// preferably on a widget not in `taken`.
    fn generate_instruction(&self, state: &UiState, hint: ActionKind, taken: &[u32]) -> Result<GeneratedInstruction, ClientError>;

    /// Turns a low-level instruction on widget `ui` into an action record.
    fn translate_action(&self, low_level: &str, ui: u32, state: &UiState) -> Result<RawActionRecord, ClientError>;

    fn verify_low_high(&self, high: &str, low: &str, state: &UiState) -> Result<Judgement, ClientError>;

    fn verify_action_low(&self, low: &str, action: &Action, state: &UiState) -> Result<Judgement, ClientError>;

    /// The raw category answer; callers coerce it with [`coerce_category`].
    fn classify_task(&self, goal: &str, state: Option<&UiState>) -> Result<String, ClientError>;
}

/// A [`GeneratorClient`] that renders the shipped prompts and parses the
/// replies of any [`CompletionBackend`].
pub struct PromptClient<B> {
    backend: B,
}

impl<B: CompletionBackend> PromptClient<B> {
    pub fn new(backend: B) -> Self {
        PromptClient { backend }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    fn judgement(&self, request: CompletionRequest) -> Result<Judgement, ClientError> {
        let template = request.template;
        let reply = self.backend.complete(&request)?;
        let yes = prompts::reply_yes_no(&reply, "Correct").ok_or_else(|| ClientError::bad(template, "no Yes/No under \"Correct\""))?;
        let analysis = prompts::reply_string(&reply, "Analysis").unwrap_or_default();
        Ok(Judgement { yes, analysis })
    }
}

fn widget_inputs(state: &UiState) -> Value {
    Value::Array(state.widgets.iter().map(|w| json!({"index": w.index, "label": w.text_label})).collect())
}

impl<B: CompletionBackend> GeneratorClient for PromptClient<B> {
    fn generate_instruction(&self, state: &UiState, hint: ActionKind, taken: &[u32]) -> Result<GeneratedInstruction, ClientError> {
        let t = TemplateId::ConstructInstructions;
        let request = CompletionRequest::new(t, prompts::render_construct(state, hint, taken), Some(state.screenshot_ref.clone()))
            .with_input("action_type", hint.as_str())
            .with_input("widgets", widget_inputs(state))
            .with_input("taken", taken.to_vec());
        let reply = self.backend.complete(&request)?;
        let field = |key: &str| prompts::reply_string(&reply, key).ok_or_else(|| ClientError::bad(t, format!("missing \"{key}\"")));
        let ui_item = field("UI item")?;
        let ui_item = ui_item
            .trim()
            .parse::<i64>()
            .map_err(|_| ClientError::bad(t, format!("\"UI item\" is not a number: {ui_item}")))?;
        Ok(GeneratedInstruction {
            sub_instruction: field("Sub-Instruction")?,
            analysis: prompts::reply_string(&reply, "Analysis").unwrap_or_default(),
            high_level_instruction: field("High-Level-Instruction")?,
            ui_item,
        })
    }

    fn translate_action(&self, low_level: &str, ui: u32, state: &UiState) -> Result<RawActionRecord, ClientError> {
        let t = TemplateId::GoldenAction;
        let request = CompletionRequest::new(t, prompts::render_golden(low_level, ui), Some(state.screenshot_ref.clone()))
            .with_input("low_level", low_level)
            .with_input("ui", ui);
        let reply = self.backend.complete(&request)?;
        let obj = extract_object(&reply, "action_type").ok_or_else(|| ClientError::bad(t, GrammarError::NoActionFound.to_string()))?;
        RawActionRecord::from_json(&obj).map_err(|e| ClientError::bad(t, e.to_string()))
    }

    fn verify_low_high(&self, high: &str, low: &str, state: &UiState) -> Result<Judgement, ClientError> {
        let request = CompletionRequest::new(
            TemplateId::VerifyLowHigh,
            prompts::render_verify_low_high(high, low),
            Some(state.screenshot_ref.clone()),
        )
        .with_input("high_level", high)
        .with_input("low_level", low);
        self.judgement(request)
    }

    fn verify_action_low(&self, low: &str, action: &Action, state: &UiState) -> Result<Judgement, ClientError> {
        let request = CompletionRequest::new(
            TemplateId::VerifyActionLow,
            prompts::render_verify_action_low(low, action),
            Some(state.screenshot_ref.clone()),
        )
        .with_input("low_level", low)
        .with_input("action", serialize_action(action));
        self.judgement(request)
    }

    fn classify_task(&self, goal: &str, state: Option<&UiState>) -> Result<String, ClientError> {
        let t = TemplateId::ClassifyTask;
        let request = CompletionRequest::new(t, prompts::render_classify(goal), state.map(|s| s.screenshot_ref.clone()))
            .with_input("goal", goal);
        let reply = self.backend.complete(&request)?;
        prompts::reply_string(&reply, "Categories").ok_or_else(|| ClientError::bad(t, "missing \"Categories\""))
    }
}

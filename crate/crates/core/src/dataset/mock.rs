//! A deterministic stand-in for the generation model.
//!
//! Replies are a pure function of the seed and the request, so whole
//! pipeline runs are reproducible. It reads the structured request inputs
//! rather than the prompt text and answers in the formats the prompts ask
//! for, which keeps the reply parsers honest.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::backend::{BackendError, CompletionBackend, CompletionRequest};
use super::generator::PromptClient;
use super::prompts::{reply_dict, TemplateId};

#[derive(Debug, Clone, PartialEq)]
pub struct MockBackend {
    pub seed: u64,
    /// Probability of answering "No" to a high/low-level consistency check.
    pub reject_low_high: f64,
    /// Probability of answering "No" to an action/low-level check.
    pub reject_action_low: f64,
}

pub type MockClient = PromptClient<MockBackend>;

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed, reject_low_high: 0.0, reject_action_low: 0.0 }
    }

    pub fn with_rejection(mut self, low_high: f64, action_low: f64) -> Self {
        self.reject_low_high = low_high;
        self.reject_action_low = action_low;
        self
    }

    pub fn client(self) -> MockClient {
        PromptClient::new(self)
    }

    fn rng(&self, request: &CompletionRequest) -> ChaCha8Rng {
        let digest = request.hash();
        let salt = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
        ChaCha8Rng::seed_from_u64(self.seed ^ salt)
    }
}

const TYPED_WORDS: [&str; 6] = ["weather today", "alice", "coffee shops", "meeting notes", "hello", "running shoes"];

const GOAL_FRAMES: [&str; 5] = [
    "Use the {label} option to get this done",
    "I want to go to {label} and continue from there",
    "Find {label} on this screen and use it",
    "Get to {label} so I can finish my task",
    "Open up {label} for me",
];

const CATEGORY_KEYWORDS: [(&str, &[&str]); 16] = [
    ("Shopping", &["buy", "shop", "cart", "order", "shoes", "price"]),
    ("Email", &["email", "gmail", "inbox", "mail"]),
    ("Messaging", &["message", "chat", "sms", "whatsapp"]),
    ("Maps", &["map", "directions", "navigate to", "route"]),
    ("Weather", &["weather", "forecast", "temperature"]),
    ("Music", &["music", "song", "playlist", "album"]),
    ("Videos", &["video", "youtube", "movie", "watch"]),
    ("Calendar", &["calendar", "meeting", "event", "schedule"]),
    ("Clock & Alarms", &["alarm", "timer", "stopwatch", "clock"]),
    ("Notes & Todos", &["note", "todo", "to-do", "checklist"]),
    ("Contacts", &["contact", "phone number"]),
    ("Recipes", &["recipe", "cook", "ingredient"]),
    ("Flights", &["flight", "airline", "boarding"]),
    ("Finance", &["bank", "stock", "budget", "payment"]),
    ("News", &["news", "headline", "article"]),
    ("Files", &["file", "folder", "download"]),
];

fn mock_category(goal: &str) -> &'static str {
    let goal = goal.to_lowercase();
    CATEGORY_KEYWORDS
        .iter()
        .find(|(_, words)| words.iter().any(|w| goal.contains(w)))
        .map(|(c, _)| *c)
        .unwrap_or("Other")
}

fn input_str<'a>(request: &'a CompletionRequest, key: &str) -> Result<&'a str, BackendError> {
    request
        .inputs
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Malformed(format!("mock needs input `{key}`")))
}

impl MockBackend {
    fn construct(&self, request: &CompletionRequest, rng: &mut ChaCha8Rng) -> Result<String, BackendError> {
        let kind = input_str(request, "action_type")?;
        let widgets: Vec<(u64, String)> = request
            .inputs
            .get("widgets")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Malformed("mock needs input `widgets`".into()))?
            .iter()
            .filter_map(|w| {
                let index = w.get("index")?.as_u64()?;
                let label = w.get("label").and_then(Value::as_str).map_or_else(|| format!("item {index}"), str::to_string);
                Some((index, label))
            })
            .collect();
        let taken: Vec<u64> = request
            .inputs
            .get("taken")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_u64).collect())
            .unwrap_or_default();
        let free: Vec<&(u64, String)> = widgets.iter().filter(|(i, _)| !taken.contains(i)).collect();
        let pool: Vec<&(u64, String)> = if free.is_empty() { widgets.iter().collect() } else { free };
        let Some(&&(ui, ref label)) = pool.first() else {
            return Err(BackendError::Malformed("mock got a screen without widgets".into()));
        };
        let sub = match kind {
            "click" => format!("Click the {label} button"),
            "long_press" => format!("Long press the {label} item"),
            "type" => format!("Type \"{}\" into the {label} field", TYPED_WORDS.choose(rng).expect("words")),
            "scroll" => format!("Scroll {} on the {label} list", ["up", "down", "left", "right"].choose(rng).expect("dirs")),
            "navigate_back" => format!("Go back from the {label} screen"),
            "navigate_home" => "Go to the home screen".to_string(),
            "open_app" => format!("Open app {label}"),
            "status" => "Report that the task is complete".to_string(),
            _ => format!("Wait for the {label} screen to load"),
        };
        let high = GOAL_FRAMES.choose(rng).expect("frames").replace("{label}", label);
        Ok(reply_dict(&[
            ("Sub-Instruction", Value::from(sub)),
            ("Analysis", Value::from(format!("The screen shows {label}; acting on it moves the task forward."))),
            ("High-Level-Instruction", Value::from(high)),
            ("UI item", Value::from(ui)),
        ]))
    }

    fn golden(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let low = input_str(request, "low_level")?;
        let ui = request.inputs.get("ui").and_then(Value::as_u64).unwrap_or(1);
        let lower = low.to_lowercase();
        let quoted = low.split('"').nth(1);
        let record = if lower.starts_with("long press") {
            format!("{{\"action_type\": \"long_press\", \"ui\": {ui}}}")
        } else if lower.starts_with("click") {
            format!("{{\"action_type\": \"click\", \"ui\": {ui}}}")
        } else if let (true, Some(text)) = (lower.starts_with("type"), quoted) {
            format!("{{\"action_type\": \"type\", \"text\": {}}}", Value::from(text))
        } else if lower.starts_with("scroll") {
            let dir = lower.split_whitespace().nth(1).unwrap_or("down");
            format!("{{\"action_type\": \"scroll\", \"direction\": \"{dir}\"}}")
        } else if lower.starts_with("go back") {
            "{\"action_type\": \"navigate_back\"}".to_string()
        } else if lower.starts_with("go to the home") {
            "{\"action_type\": \"navigate_home\"}".to_string()
        } else if let Some(app) = low.strip_prefix("Open app ") {
            format!("{{\"action_type\": \"open_app\", \"app_name\": {}}}", Value::from(app))
        } else if lower.starts_with("report") {
            "{\"action_type\": \"status\", \"goal_status\": \"successful\"}".to_string()
        } else {
            "{\"action_type\": \"wait\"}".to_string()
        };
        Ok(format!("actions: {record}"))
    }

    fn verify(&self, rng: &mut ChaCha8Rng, reject: f64) -> String {
        let yes = rng.random::<f64>() >= reject;
        reply_dict(&[
            ("Analysis", Value::from(if yes { "The step serves the instruction." } else { "The step does not serve the instruction." })),
            // unquoted, exactly as the prompt's example dictionary shows it
            ("Correct", Value::from(if yes { "Yes" } else { "No" })),
        ])
        .replace("\"Yes\"", "Yes")
        .replace("\"No\"", "No")
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut rng = self.rng(request);
        match request.template {
            TemplateId::ConstructInstructions => self.construct(request, &mut rng),
            TemplateId::GoldenAction => self.golden(request),
            TemplateId::VerifyLowHigh => Ok(self.verify(&mut rng, self.reject_low_high)),
            TemplateId::VerifyActionLow => Ok(self.verify(&mut rng, self.reject_action_low)),
            TemplateId::ClassifyTask => {
                let goal = input_str(request, "goal")?;
                Ok(reply_dict(&[
                    ("Analysis", Value::from(format!("The goal \"{goal}\" fits this category best."))),
                    ("Categories", Value::from(mock_category(goal))),
                ]))
            }
        }
    }
}

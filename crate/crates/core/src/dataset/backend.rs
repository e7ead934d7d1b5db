//! Text-completion backends behind the generator client.
//!
//! A [`CompletionRequest`] is identified by the SHA-256 of its template id,
//! prompt and image reference. Transcripts map that hash to the reply so a
//! run against a live model can be replayed offline. Transcript files are
//! JSONL, one entry per line, sorted by hash:
//!
//! ```json
//! {"hash":"3f1c…","image_ref":"e1/0.png","prompt":"You are …","response":"{…}","template":"verify_low_high"}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::prompts::TemplateId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend answered with status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("no transcript entry for request {0}")]
    ReplayMiss(String),
    #[error("{0}")]
    Config(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub template: TemplateId,
    pub prompt: String,
    pub image_ref: Option<String>,
    /// Structured copies of what the prompt was filled with. Not sent to
    /// remote models and not part of the hash; the mock backend reads them.
    #[serde(skip)]
    pub inputs: BTreeMap<String, Value>,
}

impl CompletionRequest {
    pub fn new(template: TemplateId, prompt: String, image_ref: Option<String>) -> Self {
        CompletionRequest { template, prompt, image_ref, inputs: BTreeMap::new() }
    }

    pub fn with_input(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.inputs.insert(key.to_string(), value.into());
        self
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Retries transport failures and 429/5xx answers with exponential backoff.
pub struct RetryingBackend<B> {
    inner: B,
    attempts: u32,
    base_delay: Duration,
}

impl<B> RetryingBackend<B> {
    pub fn new(inner: B, attempts: u32, base_delay: Duration) -> Self {
        RetryingBackend { inner, attempts: attempts.max(1), base_delay }
    }
}

impl<B: CompletionBackend> CompletionBackend for RetryingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut attempt = 0;
        loop {
            match self.inner.complete(request) {
                Err(e) if e.retryable() && attempt + 1 < self.attempts => {
                    let delay = self.base_delay * 2u32.pow(attempt);
                    log::warn!("completion attempt {} failed ({e}); retrying in {delay:?}", attempt + 1);
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub hash: String,
    pub template: TemplateId,
    pub prompt: String,
    #[serde(default)]
    pub image_ref: Option<String>,
    pub response: String,
}

pub fn transcript_to_jsonl<'a>(entries: impl IntoIterator<Item = &'a TranscriptEntry>) -> String {
    let mut sorted: Vec<&TranscriptEntry> = entries.into_iter().collect();
    sorted.sort_by(|a, b| a.hash.cmp(&b.hash));
    let mut out = String::new();
    for e in sorted {
        out.push_str(&serde_json::to_string(&serde_json::to_value(e).expect("entry")).expect("entry"));
        out.push('\n');
    }
    out
}

pub fn transcript_from_jsonl(text: &str) -> Result<Vec<TranscriptEntry>, BackendError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| BackendError::Malformed(format!("transcript line {}: {e}", i + 1))))
        .collect()
}

/// Passes requests through and remembers every reply.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<BTreeMap<String, TranscriptEntry>>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, log: Mutex::new(BTreeMap::new()) }
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.log.lock().expect("transcript lock").values().cloned().collect()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, transcript_to_jsonl(&self.entries()))
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let response = self.inner.complete(request)?;
        let hash = request.hash();
        let entry = TranscriptEntry {
            hash: hash.clone(),
            template: request.template,
            prompt: request.prompt.clone(),
            image_ref: request.image_ref.clone(),
            response: response.clone(),
        };
        self.log.lock().expect("transcript lock").insert(hash, entry);
        Ok(response)
    }
}

/// Answers only from a transcript.
pub struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        ReplayBackend { responses: entries.into_iter().map(|e| (e.hash, e.response)).collect() }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self::from_entries(transcript_from_jsonl(&text)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let hash = request.hash();
        self.responses.get(&hash).cloned().ok_or(BackendError::ReplayMiss(hash))
    }
}

pub const ENV_ENDPOINT: &str = "STATEVAL_GENERATOR_ENDPOINT";
pub const ENV_KEY: &str = "STATEVAL_GENERATOR_KEY";
pub const ENV_MODEL: &str = "STATEVAL_GENERATOR_MODEL";
pub const ENV_CONCURRENCY: &str = "STATEVAL_GENERATOR_CONCURRENCY";
pub const ENV_TRANSCRIPT: &str = "STATEVAL_TRANSCRIPT";

/// An OpenAI-compatible chat-completions endpoint.
#[cfg(feature = "http")]
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    key: Option<String>,
    model: String,
    /// Screenshots are attached inline when their path resolves under this root.
    image_root: Option<std::path::PathBuf>,
}

#[cfg(feature = "http")]
impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, key: Option<String>, model: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpBackend { agent, endpoint: endpoint.into(), key, model: model.into(), image_root: None }
    }

    pub fn with_image_root(mut self, root: impl Into<std::path::PathBuf>) -> Self {
        self.image_root = Some(root.into());
        self
    }

    /// Reads endpoint, key and model from the environment.
    pub fn from_env(timeout: Duration) -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENV_ENDPOINT).map_err(|_| BackendError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let key = std::env::var(ENV_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4o-mini".to_string());
        Ok(Self::new(endpoint, key, model, timeout))
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        use base64::Engine;
        let image = request
            .image_ref
            .as_ref()
            .zip(self.image_root.as_ref())
            .and_then(|(r, root)| fs::read(root.join(r)).ok())
            .map(|bytes| base64::engine::general_purpose::STANDARD.encode(bytes));
        let content = match image {
            Some(b64) => serde_json::json!([
                {"type": "text", "text": request.prompt},
                {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}}
            ]),
            None => Value::String(request.prompt.clone()),
        };
        serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        })
    }
}

#[cfg(feature = "http")]
impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send(self.body(request).to_string()) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(status)) => return Err(BackendError::Status { status, body: String::new() }),
            Err(e) => return Err(BackendError::Transport(e.to_string())),
        };
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
    }
}

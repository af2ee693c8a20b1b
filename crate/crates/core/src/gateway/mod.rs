//! The single path through which every agent talks to a language model.
//!
//! A [`Gateway`] renders a template, sends it to a [`Backend`] (live HTTP or
//! the scripted mock), and parses the reply against a [`ResponseSchema`],
//! re-issuing the request up to `parse_retries` times when the reply does not
//! parse. A global completion cap and an in-flight limit apply to every call.

mod limiter;
pub mod live;
pub mod mock;
pub mod schema;
pub mod template;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::LabelSet;
use limiter::Limiter;
pub use schema::{GeneratedSample, JudgeVerdict, Parsed, RawInstantiation, ResponseSchema};
pub use template::{render, PlaceholderMap, RenderedPrompt, TemplateError, TemplateId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("unscripted request for template {template}: {detail}")]
    UnscriptedRequest { template: TemplateId, detail: String },
    #[error("could not parse {template} response after {attempts} attempts: {message}")]
    Parse {
        template: TemplateId,
        attempts: u32,
        message: String,
        raw: String,
    },
    #[error("completion budget of {cap} calls exhausted")]
    BudgetExceeded { cap: u64 },
}

/// What a backend may fail with.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Unscripted(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    #[default]
    Medium,
    High,
}

impl ReasoningEffort {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningEffort::Low => "low",
            ReasoningEffort::Medium => "medium",
            ReasoningEffort::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: String,
    pub reasoning_effort: ReasoningEffort,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            model: "gpt-5-mini".to_string(),
            reasoning_effort: ReasoningEffort::Medium,
            temperature: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub template_id: TemplateId,
    pub placeholders: PlaceholderMap,
    pub schema: ResponseSchema,
    /// Overrides the gateway's default model parameters.
    pub model_params: Option<ModelParams>,
    /// Needed by schemas that produce labels.
    pub labels: Option<LabelSet>,
    /// Earlier turns of the same conversation, sent before this prompt.
    pub history: Vec<ChatMessage>,
    /// Appended verbatim to the rendered user text.
    pub user_suffix: Option<String>,
}

impl CompletionRequest {
    pub fn new(template_id: TemplateId, schema: ResponseSchema) -> Self {
        Self {
            template_id,
            placeholders: PlaceholderMap::new(),
            schema,
            model_params: None,
            labels: None,
            history: Vec::new(),
            user_suffix: None,
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<String>) -> Self {
        self.placeholders.insert(name.to_string(), value.into());
        self
    }

    pub fn labels(mut self, labels: &LabelSet) -> Self {
        self.labels = Some(labels.clone());
        self
    }

    pub fn history(mut self, history: Vec<ChatMessage>) -> Self {
        self.history = history;
        self
    }
}

/// What a backend sees for one provider call.
#[derive(Debug)]
pub struct BackendRequest<'a> {
    pub template_id: TemplateId,
    pub placeholders: &'a PlaceholderMap,
    pub messages: &'a [ChatMessage],
    pub schema: ResponseSchema,
    pub model: &'a ModelParams,
}

impl BackendRequest<'_> {
    /// All message contents joined, for substring matching.
    pub fn text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError>;

    /// Whether the gateway should append a trailing format instruction
    /// (false for backends that constrain decoding to the schema).
    fn wants_format_instructions(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub parse_retries: u32,
    pub max_completions: u64,
    pub max_in_flight: usize,
    pub model: ModelParams,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            parse_retries: 2,
            max_completions: 50_000,
            max_in_flight: 8,
            model: ModelParams::default(),
        }
    }
}

/// A parsed completion plus everything needed to log it.
#[derive(Debug, Clone)]
pub struct Completion {
    pub value: Parsed,
    pub raw: String,
    pub messages: Vec<ChatMessage>,
    pub attempts: u32,
}

pub struct Gateway {
    shared: Arc<Shared>,
    tally: Option<Tally>,
}

struct Shared {
    backend: Arc<dyn Backend>,
    config: GatewayConfig,
    used: AtomicU64,
    limiter: Limiter,
    per_template: Mutex<BTreeMap<TemplateId, u64>>,
}

/// Calls issued through one tracked handle, by template.
#[derive(Debug, Clone, Default)]
pub struct Tally(Arc<Mutex<BTreeMap<TemplateId, u64>>>);

impl Tally {
    pub fn counts(&self) -> BTreeMap<TemplateId, u64> {
        self.0.lock().unwrap().clone()
    }

    pub fn total(&self) -> u64 {
        self.0.lock().unwrap().values().sum()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, config: GatewayConfig) -> Self {
        let limiter = Limiter::new(config.max_in_flight.max(1));
        Self {
            shared: Arc::new(Shared {
                backend,
                config,
                used: AtomicU64::new(0),
                limiter,
                per_template: Mutex::new(BTreeMap::new()),
            }),
            tally: None,
        }
    }

    /// A handle on the same backend, budget and counters whose own calls are
    /// also recorded in the returned tally.
    pub fn tracked(&self) -> (Gateway, Tally) {
        let tally = Tally::default();
        let gw = Gateway {
            shared: Arc::clone(&self.shared),
            tally: Some(tally.clone()),
        };
        (gw, tally)
    }

    pub fn with_backend(backend: impl Backend + 'static) -> Self {
        Self::new(Arc::new(backend), GatewayConfig::default())
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.shared.config
    }

    pub fn backend_name(&self) -> &str {
        self.shared.backend.name()
    }

    /// Provider calls issued so far.
    pub fn completions_used(&self) -> u64 {
        self.shared.used.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, template: TemplateId) -> u64 {
        self.shared
            .per_template
            .lock()
            .unwrap()
            .get(&template)
            .copied()
            .unwrap_or(0)
    }

    pub fn call_counts(&self) -> BTreeMap<TemplateId, u64> {
        self.shared.per_template.lock().unwrap().clone()
    }

    /// Builds the message list for a request without sending it.
    pub fn messages_for(&self, request: &CompletionRequest) -> Result<Vec<ChatMessage>, GatewayError> {
        let prompt = render(request.template_id, &request.placeholders)?;
        let mut messages = request.history.clone();
        if !prompt.system.is_empty() {
            messages.push(ChatMessage::new(Role::System, prompt.system));
        }
        let mut user = prompt.user;
        if let Some(suffix) = &request.user_suffix {
            user.push_str(suffix);
        }
        if self.shared.backend.wants_format_instructions() {
            if let Some(instr) = request.schema.format_instruction() {
                user.push_str("\n\n");
                user.push_str(instr);
            }
        }
        messages.push(ChatMessage::new(Role::User, user));
        Ok(messages)
    }

    fn reserve(&self) -> Result<(), GatewayError> {
        let cap = self.shared.config.max_completions;
        self.shared
            .used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| (n < cap).then_some(n + 1))
            .map(|_| ())
            .map_err(|_| GatewayError::BudgetExceeded { cap })
    }

    /// Sends the request and parses the reply, retrying unparseable replies.
    /// Never issues more than `parse_retries + 1` provider calls.
    pub fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        let messages = self.messages_for(request)?;
        let model = request.model_params.as_ref().unwrap_or(&self.shared.config.model);
        let max_attempts = self.shared.config.parse_retries + 1;
        let mut last_error = String::new();
        let mut last_raw = String::new();
        for attempt in 1..=max_attempts {
            self.reserve()?;
            *self
                .shared
                .per_template
                .lock()
                .unwrap()
                .entry(request.template_id)
                .or_default() += 1;
            if let Some(t) = &self.tally {
                *t.0.lock().unwrap().entry(request.template_id).or_default() += 1;
            }
            let raw = {
                let _permit = self.shared.limiter.acquire();
                let backend_request = BackendRequest {
                    template_id: request.template_id,
                    placeholders: &request.placeholders,
                    messages: &messages,
                    schema: request.schema,
                    model,
                };
                self.shared.backend.complete(&backend_request).map_err(|e| match e {
                    BackendError::Provider(m) => GatewayError::Provider(m),
                    BackendError::Unscripted(detail) => GatewayError::UnscriptedRequest {
                        template: request.template_id,
                        detail,
                    },
                })?
            };
            match request.schema.parse(&raw, request.labels.as_ref()) {
                Ok(value) => {
                    return Ok(Completion {
                        value,
                        raw,
                        messages,
                        attempts: attempt,
                    })
                }
                Err(e) => {
                    last_error = e;
                    last_raw = raw;
                }
            }
        }
        Err(GatewayError::Parse {
            template: request.template_id,
            attempts: max_attempts,
            message: last_error,
            raw: last_raw,
        })
    }
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.shared.backend.name())
            .field("config", &self.shared.config)
            .field("used", &self.completions_used())
            .finish()
    }
}

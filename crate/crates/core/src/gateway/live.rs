//! Chat-completions backend over HTTPS (OpenAI-compatible wire format).

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, BackendRequest, ResponseSchema};

pub const ENV_BASE_URL: &str = "GUARDSYNTH_BASE_URL";
pub const ENV_API_KEY: &str = "GUARDSYNTH_API_KEY";
pub const ENV_MODEL: &str = "GUARDSYNTH_MODEL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub base_url: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    /// Request `json_schema` constrained decoding for structured schemas.
    #[serde(default = "yes")]
    pub structured_outputs: bool,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn yes() -> bool {
    true
}

fn default_timeout() -> u64 {
    300
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            structured_outputs: true,
            timeout_secs: default_timeout(),
        }
    }
}

impl LiveConfig {
    /// Reads base URL and key from the environment. `OPENAI_API_KEY` is
    /// consulted when the crate-specific key is unset.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            cfg.base_url = url;
        }
        cfg.api_key = std::env::var(ENV_API_KEY)
            .or_else(|_| std::env::var("OPENAI_API_KEY"))
            .ok();
        cfg
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    agent: ureq::Agent,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    /// Request body for one call; exposed for inspection in tests.
    pub fn body(&self, request: &BackendRequest<'_>) -> Value {
        let mut body = json!({
            "model": request.model.model,
            "messages": request.messages,
            "reasoning_effort": request.model.reasoning_effort.as_str(),
        });
        if let Some(t) = request.model.temperature {
            body["temperature"] = json!(t);
        }
        if self.config.structured_outputs {
            if let Some(schema) = request.schema.json_schema() {
                body["response_format"] = json!({
                    "type": "json_schema",
                    "json_schema": {"name": schema_name(request.schema), "schema": schema, "strict": true},
                });
            }
        }
        body
    }
}

fn schema_name(schema: ResponseSchema) -> &'static str {
    match schema {
        ResponseSchema::FreeText => "free_text",
        ResponseSchema::DimensionList => "dimension_list",
        ResponseSchema::InstantiationList => "instantiation_list",
        ResponseSchema::GeneratedSample => "generated_sample",
        ResponseSchema::JudgeVerdict => "judge_verdict",
        ResponseSchema::SingleCharLabel => "single_char_label",
        ResponseSchema::RelevanceScore => "relevance_score",
    }
}

impl Backend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn wants_format_instructions(&self) -> bool {
        !self.config.structured_outputs
    }

    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.body(request))
            .map_err(|e| BackendError::Provider(format!("transport: {e}")))?;
        let status = resp.status().as_u16();
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Provider(format!("HTTP {status}: unreadable body: {e}")))?;
        if !(200..300).contains(&status) {
            let msg = body["error"]["message"].as_str().unwrap_or("no message");
            return Err(BackendError::Provider(format!("HTTP {status}: {msg}")));
        }
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Provider("response has no message content".into()))
    }
}

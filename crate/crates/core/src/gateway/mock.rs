//! Deterministic scripted backend.
//!
//! A scenario is an ordered list of rules. Each request is matched against
//! the rules in order; the first rule whose template, substring and
//! placeholder conditions all hold (and which still has responses left)
//! answers it. A request no rule answers fails with `Unscripted`: there is no
//! fallback response.
//!
//! Responses may reference request placeholders as `${name}`. When a response
//! is a JSON object, substitution happens on its string leaves before
//! serialization, so inserted text is escaped correctly.
//!
//! Rule matching is serialized behind a mutex. Rules whose responses depend
//! on call order (`responses` lists) are only deterministic when the calls
//! they match are themselves issued in a fixed order, e.g. one judge's
//! successive rounds.
//!
//! ```json
//! {"rules": [
//!   {"template": "judge_round1", "when": {"persona": "strict"},
//!    "response": {"reasoning": "r", "confidence": 0.9, "label": "True"}},
//!   {"template": "classification", "contains": ["GPS"], "responses": ["1", "0"], "then": "cycle"}
//! ]}
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, BackendError, BackendRequest, PlaceholderMap, TemplateId};

/// What a rule does once its response list has been consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfterLast {
    #[default]
    RepeatLast,
    Cycle,
    /// The rule stops matching.
    Exhaust,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<TemplateId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub when: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<Value>,
    #[serde(default)]
    pub then: AfterLast,
}

impl MockRule {
    pub fn new(template: TemplateId) -> Self {
        Self {
            template: Some(template),
            ..Self::default()
        }
    }

    /// Matches requests for any template.
    pub fn any() -> Self {
        Self::default()
    }

    pub fn contains(mut self, needle: impl Into<String>) -> Self {
        self.contains.push(needle.into());
        self
    }

    pub fn when(mut self, placeholder: impl Into<String>, value: impl Into<String>) -> Self {
        self.when.insert(placeholder.into(), value.into());
        self
    }

    pub fn respond(mut self, response: impl Into<Value>) -> Self {
        self.responses.push(response.into());
        self
    }

    pub fn respond_seq<I, V>(mut self, responses: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<Value>,
    {
        self.responses.extend(responses.into_iter().map(Into::into));
        self
    }

    pub fn cycle(mut self) -> Self {
        self.then = AfterLast::Cycle;
        self
    }

    pub fn exhaust(mut self) -> Self {
        self.then = AfterLast::Exhaust;
        self
    }

    fn all_responses(&self) -> Vec<&Value> {
        self.response.iter().chain(self.responses.iter()).collect()
    }

    fn matches(&self, request: &BackendRequest<'_>, text: &str) -> bool {
        self.template.is_none_or(|t| t == request.template_id)
            && self.contains.iter().all(|n| text.contains(n.as_str()))
            && self
                .when
                .iter()
                .all(|(k, v)| request.placeholders.get(k).is_some_and(|x| x == v))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScenario {
    pub rules: Vec<MockRule>,
}

/// One request seen by the mock.
#[derive(Debug, Clone, PartialEq)]
pub struct MockCall {
    pub template: TemplateId,
    pub placeholders: PlaceholderMap,
    pub rule: usize,
}

#[derive(Debug, Default)]
pub struct ScriptedBackend {
    rules: Vec<MockRule>,
    state: Mutex<State>,
}

#[derive(Debug, Default)]
struct State {
    served: Vec<usize>,
    calls: Vec<MockCall>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<MockRule>) -> Self {
        let served = vec![0; rules.len()];
        Self {
            rules,
            state: Mutex::new(State {
                served,
                calls: Vec::new(),
            }),
        }
    }

    pub fn from_scenario(scenario: MockScenario) -> Self {
        Self::new(scenario.rules)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::from_scenario(serde_json::from_str(text)?))
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Every request answered so far, in arrival order.
    pub fn calls(&self) -> Vec<MockCall> {
        self.state.lock().unwrap().calls.clone()
    }

    pub fn calls_for(&self, template: TemplateId) -> usize {
        self.state
            .lock()
            .unwrap()
            .calls
            .iter()
            .filter(|c| c.template == template)
            .count()
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn wants_format_instructions(&self) -> bool {
        false
    }

    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError> {
        let text = request.text();
        let mut state = self.state.lock().unwrap();
        for (i, rule) in self.rules.iter().enumerate() {
            if !rule.matches(request, &text) {
                continue;
            }
            let responses = rule.all_responses();
            if responses.is_empty() {
                continue;
            }
            let served = state.served[i];
            let pick = match rule.then {
                _ if served < responses.len() => served,
                AfterLast::RepeatLast => responses.len() - 1,
                AfterLast::Cycle => served % responses.len(),
                AfterLast::Exhaust => continue,
            };
            state.served[i] += 1;
            state.calls.push(MockCall {
                template: request.template_id,
                placeholders: request.placeholders.clone(),
                rule: i,
            });
            return Ok(render_response(responses[pick], request.placeholders));
        }
        let preview: String = text.chars().take(120).collect();
        Err(BackendError::Unscripted(format!("no rule matches: {preview:?}")))
    }
}

fn render_response(response: &Value, placeholders: &PlaceholderMap) -> String {
    match response {
        Value::String(s) => interpolate(s, placeholders),
        other => substitute_leaves(other, placeholders).to_string(),
    }
}

fn substitute_leaves(v: &Value, placeholders: &PlaceholderMap) -> Value {
    match v {
        Value::String(s) => Value::String(interpolate(s, placeholders)),
        Value::Array(items) => Value::Array(items.iter().map(|x| substitute_leaves(x, placeholders)).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, x)| (k.clone(), substitute_leaves(x, placeholders)))
                .collect(),
        ),
        other => other.clone(),
    }
}

/// Replaces `${name}` with the placeholder value; unknown names are left as is.
fn interpolate(s: &str, placeholders: &PlaceholderMap) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find('}') {
            Some(end) if placeholders.contains_key(&after[..end]) => {
                out.push_str(&placeholders[&after[..end]]);
                rest = &after[end + 1..];
            }
            _ => {
                out.push_str("${");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

//! Structured response schemas and their parsers.
//!
//! Parsers are lenient about framing (code fences, prose around a JSON
//! object, a handful of common field-name aliases) and strict about content:
//! out-of-range numbers, unknown labels and empty required fields are
//! schema violations.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::task::{Label, LabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSchema {
    FreeText,
    DimensionList,
    InstantiationList,
    GeneratedSample,
    JudgeVerdict,
    SingleCharLabel,
    RelevanceScore,
}

/// A judge's structured answer for one debate round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub label: Label,
    pub confidence: f64,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInstantiation {
    pub text: String,
    pub label_relevance: Vec<Label>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub input_block: String,
    /// The label the generator believes the block gets, when it states one.
    pub stated_label: Option<String>,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Parsed {
    Text(String),
    Dimensions(Vec<String>),
    Instantiations(Vec<RawInstantiation>),
    Sample(GeneratedSample),
    Verdict(JudgeVerdict),
    Label(Label),
    Score(f64),
}

impl ResponseSchema {
    pub fn needs_labels(self) -> bool {
        matches!(
            self,
            ResponseSchema::InstantiationList | ResponseSchema::JudgeVerdict | ResponseSchema::SingleCharLabel
        )
    }

    /// Parses a raw completion. The error string describes the violation and
    /// is fed back into transcripts and diagnostics.
    pub fn parse(self, raw: &str, labels: Option<&LabelSet>) -> Result<Parsed, String> {
        let labels = || labels.ok_or_else(|| format!("{self:?} parsing needs the task label set"));
        match self {
            ResponseSchema::FreeText => Ok(Parsed::Text(raw.to_string())),
            ResponseSchema::DimensionList => parse_dimensions(raw).map(Parsed::Dimensions),
            ResponseSchema::InstantiationList => parse_instantiations(raw, labels()?).map(Parsed::Instantiations),
            ResponseSchema::GeneratedSample => parse_sample(raw).map(Parsed::Sample),
            ResponseSchema::JudgeVerdict => parse_verdict(raw, labels()?).map(Parsed::Verdict),
            ResponseSchema::SingleCharLabel => parse_single_char(raw, labels()?).map(Parsed::Label),
            ResponseSchema::RelevanceScore => parse_score(raw).map(Parsed::Score),
        }
    }

    /// JSON schema handed to providers that support constrained decoding.
    pub fn json_schema(self) -> Option<Value> {
        let string = json!({"type": "string"});
        let number = json!({"type": "number", "minimum": 0, "maximum": 1});
        let schema = match self {
            ResponseSchema::FreeText | ResponseSchema::SingleCharLabel => return None,
            ResponseSchema::DimensionList => json!({
                "type": "object",
                "properties": {"dimensions": {"type": "array", "items": {
                    "type": "object",
                    "properties": {"name": string, "description": string},
                    "required": ["name", "description"], "additionalProperties": false}}},
                "required": ["dimensions"], "additionalProperties": false
            }),
            ResponseSchema::InstantiationList => json!({
                "type": "object",
                "properties": {"instantiations": {"type": "array", "items": {
                    "type": "object",
                    "properties": {"text": string, "relevance": string, "probability": number},
                    "required": ["text", "relevance", "probability"], "additionalProperties": false}}},
                "required": ["instantiations"], "additionalProperties": false
            }),
            ResponseSchema::GeneratedSample => json!({
                "type": "object",
                "properties": {"input_block": string, "label": string, "reasoning": string},
                "required": ["input_block", "label", "reasoning"], "additionalProperties": false
            }),
            ResponseSchema::JudgeVerdict => json!({
                "type": "object",
                "properties": {"reasoning": string, "confidence": number, "label": string},
                "required": ["reasoning", "confidence", "label"], "additionalProperties": false
            }),
            ResponseSchema::RelevanceScore => json!({
                "type": "object",
                "properties": {"score": number},
                "required": ["score"], "additionalProperties": false
            }),
        };
        Some(schema)
    }

    /// Trailing instruction appended to the user message for providers
    /// without constrained decoding.
    pub fn format_instruction(self) -> Option<&'static str> {
        match self {
            ResponseSchema::FreeText | ResponseSchema::SingleCharLabel => None,
            ResponseSchema::DimensionList => Some(
                "Respond with JSON only: {\"dimensions\": [{\"name\": \"...\", \"description\": \"...\"}]}",
            ),
            ResponseSchema::InstantiationList => Some(
                "Respond with JSON only: {\"instantiations\": [{\"text\": \"...\", \"relevance\": \"True|False|Both\", \"probability\": 0.0}]}",
            ),
            ResponseSchema::GeneratedSample => {
                Some("Respond with JSON only: {\"input_block\": \"...\", \"label\": \"...\", \"reasoning\": \"...\"}")
            }
            ResponseSchema::JudgeVerdict => {
                Some("Respond with JSON only: {\"reasoning\": \"...\", \"confidence\": 0.0, \"label\": \"True|False\"}")
            }
            ResponseSchema::RelevanceScore => Some("Respond with JSON only: {\"score\": 0.0}"),
        }
    }
}

/// Pulls a JSON value out of a completion, tolerating code fences and
/// surrounding prose.
pub fn extract_json(raw: &str) -> Option<Value> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Some(v);
    }
    let unfenced = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.trim_end().strip_suffix("```"));
    if let Some(inner) = unfenced {
        if let Ok(v) = serde_json::from_str(inner.trim()) {
            return Some(v);
        }
    }
    for (open, close) in [('{', '}'), ('[', ']')] {
        if let (Some(a), Some(b)) = (trimmed.find(open), trimmed.rfind(close)) {
            if a < b {
                if let Ok(v) = serde_json::from_str(&trimmed[a..=b]) {
                    return Some(v);
                }
            }
        }
    }
    None
}

fn json_of(raw: &str) -> Result<Value, String> {
    extract_json(raw).ok_or_else(|| "response is not JSON".to_string())
}

fn field<'a>(obj: &'a Value, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| obj.get(*n))
}

fn string_field(obj: &Value, names: &[&str]) -> Option<String> {
    field(obj, names).and_then(Value::as_str).map(str::to_string)
}

fn list<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>, String> {
    match v {
        Value::Array(items) => Ok(items),
        Value::Object(_) => v
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| format!("missing array field {key:?}")),
        _ => Err(format!("expected an object with {key:?} or an array")),
    }
}

fn parse_dimensions(raw: &str) -> Result<Vec<String>, String> {
    let v = json_of(raw)?;
    let mut out = Vec::new();
    for (i, item) in list(&v, "dimensions")?.iter().enumerate() {
        let text = match item {
            Value::String(s) => s.clone(),
            Value::Object(_) => {
                let desc = string_field(item, &["description", "dimension", "text"])
                    .ok_or_else(|| format!("dimension {i} has no description"))?;
                match string_field(item, &["name", "title"]) {
                    Some(name) if !name.trim().is_empty() => format!("{}: {}", name.trim(), desc.trim()),
                    _ => desc,
                }
            }
            _ => return Err(format!("dimension {i} is neither a string nor an object")),
        };
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(format!("dimension {i} is empty"));
        }
        out.push(text);
    }
    Ok(out)
}

fn parse_instantiations(raw: &str, labels: &LabelSet) -> Result<Vec<RawInstantiation>, String> {
    let v = json_of(raw)?;
    let mut out = Vec::new();
    for (i, item) in list(&v, "instantiations")?.iter().enumerate() {
        let text = string_field(item, &["text", "instantiation", "value"])
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .ok_or_else(|| format!("instantiation {i} has no text"))?;
        let relevance = match field(item, &["relevance", "label_relevance", "relevant_to"]) {
            Some(Value::String(s)) => labels.relevance_subset(s),
            Some(Value::Bool(b)) => labels.relevance_subset(if *b { "True" } else { "False" }),
            Some(Value::Array(items)) => items
                .iter()
                .map(|x| x.as_str().and_then(|s| labels.resolve(s)))
                .collect::<Option<Vec<_>>>()
                .filter(|v| !v.is_empty()),
            _ => None,
        }
        .ok_or_else(|| format!("instantiation {i} has no usable relevance"))?;
        let weight = field(item, &["probability", "weight", "score"])
            .and_then(Value::as_f64)
            .ok_or_else(|| format!("instantiation {i} has no probability"))?;
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(format!("instantiation {i} probability {weight} outside (0, 1]"));
        }
        out.push(RawInstantiation {
            text,
            label_relevance: relevance,
            weight,
        });
    }
    Ok(out)
}

fn parse_sample(raw: &str) -> Result<GeneratedSample, String> {
    let v = json_of(raw)?;
    let input_block = string_field(&v, &["input_block", "input", "generated_input_block"])
        .filter(|s| !s.trim().is_empty())
        .ok_or("missing input_block")?;
    let reasoning = string_field(&v, &["reasoning", "rationale"])
        .filter(|s| !s.trim().is_empty())
        .ok_or("missing reasoning")?;
    let stated_label = match field(&v, &["label", "verdict"]) {
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Bool(b)) => Some(if *b { "True" } else { "False" }.to_string()),
        Some(Value::Number(n)) => Some(n.to_string()),
        _ => None,
    };
    Ok(GeneratedSample {
        input_block,
        stated_label,
        reasoning,
    })
}

fn parse_verdict(raw: &str, labels: &LabelSet) -> Result<JudgeVerdict, String> {
    let v = json_of(raw)?;
    let label_text = match field(&v, &["label", "classification", "verdict"]) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Bool(b)) => if *b { "True" } else { "False" }.to_string(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err("missing label".into()),
    };
    let label = labels
        .resolve(&label_text)
        .ok_or_else(|| format!("label {label_text:?} is not in the task label set"))?;
    let confidence = field(&v, &["confidence", "confidence_level"])
        .and_then(Value::as_f64)
        .ok_or("missing confidence")?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("confidence {confidence} outside [0, 1]"));
    }
    let reasoning = string_field(&v, &["reasoning", "rationale"]).ok_or("missing reasoning")?;
    Ok(JudgeVerdict {
        label,
        confidence,
        reasoning,
    })
}

fn parse_single_char(raw: &str, labels: &LabelSet) -> Result<Label, String> {
    let t = raw.trim();
    if t.chars().count() != 1 {
        return Err(format!("expected a single character, got {t:?}"));
    }
    labels
        .from_token(t)
        .ok_or_else(|| format!("{t:?} is not a label token"))
}

fn parse_score(raw: &str) -> Result<f64, String> {
    let score = match raw.trim().parse::<f64>() {
        Ok(x) => x,
        Err(_) => {
            let v = json_of(raw)?;
            match &v {
                Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
                _ => field(&v, &["score", "relevance", "similarity"])
                    .and_then(Value::as_f64)
                    .ok_or("missing score")?,
            }
        }
    };
    if !(0.0..=1.0).contains(&score) {
        return Err(format!("score {score} outside [0, 1]"));
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin() -> LabelSet {
        LabelSet::binary()
    }

    #[test]
    fn single_char_maps_to_label() {
        let p = ResponseSchema::SingleCharLabel.parse("1", Some(&bin())).unwrap();
        assert_eq!(p, Parsed::Label("1".into()));
        assert!(ResponseSchema::SingleCharLabel.parse("1.", Some(&bin())).is_err());
        assert!(ResponseSchema::SingleCharLabel.parse("7", Some(&bin())).is_err());
        assert_eq!(
            ResponseSchema::SingleCharLabel.parse(" 0\n", Some(&bin())).unwrap(),
            Parsed::Label("0".into())
        );
    }

    #[test]
    fn verdict_accepts_true_false_and_fences() {
        let raw = "```json\n{\"reasoning\": \"r\", \"confidence\": 0.8, \"label\": \"True\"}\n```";
        let Parsed::Verdict(v) = ResponseSchema::JudgeVerdict.parse(raw, Some(&bin())).unwrap() else {
            panic!()
        };
        assert_eq!(v.label, Label::from("1"));
        assert_eq!(v.confidence, 0.8);
    }

    #[test]
    fn verdict_rejects_bad_confidence() {
        let raw = r#"{"reasoning": "r", "confidence": 1.5, "label": "False"}"#;
        assert!(ResponseSchema::JudgeVerdict.parse(raw, Some(&bin())).is_err());
        assert!(ResponseSchema::JudgeVerdict.parse("not json", Some(&bin())).is_err());
        assert!(ResponseSchema::JudgeVerdict
            .parse(
                r#"{"reasoning": "r", "confidence": 0.5, "label": "maybe"}"#,
                Some(&bin())
            )
            .is_err());
    }

    #[test]
    fn instantiations_keep_unnormalized_weights() {
        let raw = r#"{"instantiations": [
            {"text": "a", "relevance": "True", "probability": 0.5},
            {"text": "b", "relevance": "Both", "probability": 0.3},
            {"text": "c", "relevance": "False", "probability": 0.4}]}"#;
        let Parsed::Instantiations(v) = ResponseSchema::InstantiationList.parse(raw, Some(&bin())).unwrap() else {
            panic!()
        };
        assert_eq!(v.iter().map(|i| i.weight).collect::<Vec<_>>(), vec![0.5, 0.3, 0.4]);
        assert_eq!(v[1].label_relevance.len(), 2);
        assert_eq!(v[2].label_relevance, vec![Label::from("0")]);
    }

    #[test]
    fn instantiation_weight_must_be_positive() {
        let raw = r#"[{"text": "a", "relevance": "True", "probability": 0}]"#;
        assert!(ResponseSchema::InstantiationList.parse(raw, Some(&bin())).is_err());
    }

    #[test]
    fn dimensions_accept_strings_and_objects() {
        let Parsed::Dimensions(d) = ResponseSchema::DimensionList
            .parse(
                r#"{"dimensions": ["x", {"name": "Pos", "description": "where"}]}"#,
                None,
            )
            .unwrap()
        else {
            panic!()
        };
        assert_eq!(d, vec!["x".to_string(), "Pos: where".to_string()]);
        let Parsed::Dimensions(d) = ResponseSchema::DimensionList.parse("[]", None).unwrap() else {
            panic!()
        };
        assert!(d.is_empty());
    }

    #[test]
    fn sample_requires_reasoning() {
        assert!(ResponseSchema::GeneratedSample
            .parse(r#"{"input_block": "x", "label": "True", "reasoning": " "}"#, None)
            .is_err());
        let Parsed::Sample(s) = ResponseSchema::GeneratedSample
            .parse(
                r#"Here you go: {"input_block": "x", "label": true, "reasoning": "r"}"#,
                None,
            )
            .unwrap()
        else {
            panic!()
        };
        assert_eq!(s.stated_label.as_deref(), Some("True"));
    }

    #[test]
    fn scores() {
        assert_eq!(
            ResponseSchema::RelevanceScore.parse("0.25", None).unwrap(),
            Parsed::Score(0.25)
        );
        assert_eq!(
            ResponseSchema::RelevanceScore.parse(r#"{"score": 1}"#, None).unwrap(),
            Parsed::Score(1.0)
        );
        assert!(ResponseSchema::RelevanceScore.parse("1.2", None).is_err());
    }
}

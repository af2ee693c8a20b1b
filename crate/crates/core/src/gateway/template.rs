//! Prompt templates and placeholder substitution.
//!
//! Template text lives under `templates/` in the crate root, one
//! `<id>.system.txt` / `<id>.user.txt` pair per template. Placeholders are
//! single-brace names (`{evaluation_criterion}`). Substitution is a single
//! left-to-right pass: inserted values are never rescanned, and there is no
//! escaping mechanism.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type PlaceholderMap = BTreeMap<String, String>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("missing placeholder {{{0}}}")]
    MissingPlaceholder(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    DimensionExtraction,
    DimensionInstantiation,
    DimensionSimilarity,
    InitialGeneration,
    Refinement,
    JudgeRound1,
    JudgeRoundN,
    Classification,
    CoverageRating,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::DimensionExtraction,
        TemplateId::DimensionInstantiation,
        TemplateId::DimensionSimilarity,
        TemplateId::InitialGeneration,
        TemplateId::Refinement,
        TemplateId::JudgeRound1,
        TemplateId::JudgeRoundN,
        TemplateId::Classification,
        TemplateId::CoverageRating,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::DimensionExtraction => "dimension_extraction",
            TemplateId::DimensionInstantiation => "dimension_instantiation",
            TemplateId::DimensionSimilarity => "dimension_similarity",
            TemplateId::InitialGeneration => "initial_generation",
            TemplateId::Refinement => "refinement",
            TemplateId::JudgeRound1 => "judge_round1",
            TemplateId::JudgeRoundN => "judge_round_n",
            TemplateId::Classification => "classification",
            TemplateId::CoverageRating => "coverage_rating",
        }
    }

    pub fn system_text(self) -> &'static str {
        macro_rules! t {
            ($name:literal) => {
                include_str!(concat!("../../templates/", $name, ".system.txt"))
            };
        }
        match self {
            TemplateId::DimensionExtraction => t!("dimension_extraction"),
            TemplateId::DimensionInstantiation => t!("dimension_instantiation"),
            TemplateId::DimensionSimilarity => t!("dimension_similarity"),
            TemplateId::InitialGeneration => t!("initial_generation"),
            TemplateId::Refinement => t!("refinement"),
            TemplateId::JudgeRound1 => t!("judge_round1"),
            TemplateId::JudgeRoundN => t!("judge_round_n"),
            TemplateId::Classification => t!("classification"),
            TemplateId::CoverageRating => t!("coverage_rating"),
        }
    }

    pub fn user_text(self) -> &'static str {
        macro_rules! t {
            ($name:literal) => {
                include_str!(concat!("../../templates/", $name, ".user.txt"))
            };
        }
        match self {
            TemplateId::DimensionExtraction => t!("dimension_extraction"),
            TemplateId::DimensionInstantiation => t!("dimension_instantiation"),
            TemplateId::DimensionSimilarity => t!("dimension_similarity"),
            TemplateId::InitialGeneration => t!("initial_generation"),
            TemplateId::Refinement => t!("refinement"),
            TemplateId::JudgeRound1 => t!("judge_round1"),
            TemplateId::JudgeRoundN => t!("judge_round_n"),
            TemplateId::Classification => t!("classification"),
            TemplateId::CoverageRating => t!("coverage_rating"),
        }
    }

    /// Distinct placeholder names in order of first appearance (system, then user).
    pub fn placeholders(self) -> Vec<&'static str> {
        let mut names = Vec::new();
        for text in [self.system_text(), self.user_text()] {
            for (_, name) in scan(text) {
                if !names.contains(&name) {
                    names.push(name);
                }
            }
        }
        names
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

pub fn render(id: TemplateId, values: &PlaceholderMap) -> Result<RenderedPrompt, TemplateError> {
    Ok(RenderedPrompt {
        system: substitute(id.system_text(), values)?,
        user: substitute(id.user_text(), values)?,
    })
}

/// Renders a template given by its string id.
pub fn render_named(id: &str, values: &PlaceholderMap) -> Result<RenderedPrompt, TemplateError> {
    render(id.parse()?, values)
}

/// Replaces every `{name}` in `text` with `values[name]` in one pass.
pub fn substitute(text: &str, values: &PlaceholderMap) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (start, name) in scan(text) {
        let value = values
            .get(name)
            .ok_or_else(|| TemplateError::MissingPlaceholder(name.to_string()))?;
        out.push_str(&text[last..start]);
        out.push_str(value);
        last = start + name.len() + 2;
    }
    out.push_str(&text[last..]);
    Ok(out)
}

/// Finds `{identifier}` markers; yields (byte offset of `{`, identifier).
fn scan(text: &str) -> Vec<(usize, &str)> {
    let bytes = text.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len()
                && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_' || (j > i + 1 && bytes[j].is_ascii_digit()))
            {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                found.push((i, &text[i + 1..j]));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    found
}

/// True when `text` still contains a `{name}` marker.
pub fn has_unresolved(text: &str) -> bool {
    !scan(text).is_empty()
}

//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use guardsynth::dimension::{Decomposition, Dimension, Instantiation};
use guardsynth::gateway::mock::{MockRule, ScriptedBackend};
use guardsynth::gateway::{Gateway, GatewayConfig, TemplateId};
use guardsynth::pipeline::{RunConfig, EPOCH};
use guardsynth::task::{InputBlock, InputKind, Label, LabelSet, TaskSpec};
use serde_json::{json, Value};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/health")
}

pub fn task() -> TaskSpec {
    TaskSpec::new(
        "If a user repeats or rephrases the same message 3 times, respond with a specific redirect message.",
        LabelSet::binary(),
        (0..4)
            .map(|i| InputBlock::new(format!("User: question {i}?\nAgent: answer {i}"), InputKind::Dialogue))
            .collect(),
    )
}

/// `dims` dimensions with `per` instantiations each, all supporting both labels.
pub fn decomposition(dims: usize, per: usize) -> Decomposition {
    let dimensions: Vec<Dimension> = (0..dims)
        .map(|i| Dimension::new(format!("d{i}"), format!("axis {i}")))
        .collect();
    let instantiations = dimensions
        .iter()
        .flat_map(|d| {
            (0..per).map(move |j| Instantiation {
                id: format!("{}-v{j}", d.id),
                dimension_id: d.id.clone(),
                text: format!("value {j} of {}", d.id),
                label_relevance: vec![Label::from("0"), Label::from("1")],
                weight: 1.0 / per as f64,
            })
        })
        .collect();
    Decomposition {
        dimensions,
        instantiations,
        seed_indices: vec![0],
        candidates_extracted: dims,
    }
}

pub fn verdict(word: &str) -> Value {
    json!({"label": word, "confidence": 0.9, "reasoning": format!("reads as {word}")})
}

fn generation_rules() -> Vec<MockRule> {
    let s = json!({"input_block": "${target_verdict}: ${target_dimension}", "reasoning": "why ${target_verdict}"});
    vec![
        MockRule::new(TemplateId::InitialGeneration).respond(s.clone()),
        MockRule::new(TemplateId::Refinement).respond(s),
    ]
}

fn capped(rules: Vec<MockRule>, cap: u64) -> (Gateway, Arc<ScriptedBackend>) {
    let backend = Arc::new(ScriptedBackend::new(rules));
    let cfg = GatewayConfig {
        max_completions: cap,
        ..GatewayConfig::default()
    };
    (Gateway::new(backend.clone(), cfg), backend)
}

/// Every judge agrees with the generator's target in round 1.
pub fn accept_all() -> (Gateway, Arc<ScriptedBackend>) {
    let mut rules = generation_rules();
    for word in ["True", "False"] {
        rules.push(
            MockRule::new(TemplateId::JudgeRound1)
                .contains(format!("{word}:"))
                .respond(verdict(word)),
        );
    }
    capped(rules, u64::MAX)
}

/// Every judge answers the label opposite to the target, every round.
pub fn reject_all(cap: u64) -> (Gateway, Arc<ScriptedBackend>) {
    let mut rules = generation_rules();
    for (seen, answer) in [("True:", "False"), ("False:", "True")] {
        for t in [TemplateId::JudgeRound1, TemplateId::JudgeRoundN] {
            rules.push(MockRule::new(t).contains(seen).respond(verdict(answer)));
        }
    }
    capped(rules, cap)
}

pub fn config(n: usize) -> RunConfig {
    RunConfig {
        target_size: n,
        created_at: Some(EPOCH.into()),
        ..RunConfig::default()
    }
}

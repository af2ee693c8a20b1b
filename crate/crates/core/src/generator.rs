//! Sample generation and refinement.
//!
//! The generator writes an input block for a target label along one
//! instantiated dimension, in the style of an example seed. When a debate
//! rejects a sample, `refine` rewrites it using the dissenting judges'
//! arguments, keeping the target label and provenance fixed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::DebateTranscript;
use crate::dimension::{Dimension, Instantiation};
use crate::gateway::{CompletionRequest, Gateway, GatewayError, GeneratedSample, Parsed, ResponseSchema, TemplateId};
use crate::task::{CandidateSample, InputBlock, Label, TaskSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("target label {0} is not in the task label set")]
    InvalidTargetLabel(Label),
    #[error("sample is at refinement round {round}; at most {r_max} refinements are allowed")]
    RefinementBudgetExhausted { round: u32, r_max: u32 },
    #[error("no judge dissented from the target label")]
    NothingToAggregate,
    #[error("sample provenance {sample} does not match {given}")]
    ProvenanceMismatch { sample: String, given: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Maximum refinements per episode.
    pub r_max: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { r_max: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DissentEntry {
    pub judge: usize,
    pub persona: String,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DissentFeedback {
    pub entries: Vec<DissentEntry>,
    pub aggregated: String,
}

/// The text placed in the generator's dimension section.
pub fn target_dimension_text(dimension: &Dimension, instantiation: &Instantiation) -> String {
    format!(
        "Dimension: {}\nInstantiation: {}",
        dimension.description, instantiation.text
    )
}

fn base_request(
    template: TemplateId,
    dimension: &Dimension,
    instantiation: &Instantiation,
    target: &Label,
    task: &TaskSpec,
    example_seed: &InputBlock,
) -> CompletionRequest {
    CompletionRequest::new(template, ResponseSchema::GeneratedSample)
        .labels(&task.labels)
        .with("evaluation_criterion", &task.criterion)
        .with("target_verdict", task.labels.verdict_word(target))
        .with("input_block", &example_seed.content)
        .with("target_dimension", target_dimension_text(dimension, instantiation))
}

fn into_sample(
    parsed: Parsed,
    kind_of: &InputBlock,
    target: &Label,
    instantiation: &Instantiation,
    round: u32,
) -> CandidateSample {
    let Parsed::Sample(GeneratedSample {
        input_block, reasoning, ..
    }) = parsed
    else {
        unreachable!("generated sample schema")
    };
    CandidateSample {
        input: InputBlock::new(input_block, kind_of.kind),
        target_label: target.clone(),
        reasoning,
        dimension_id: instantiation.dimension_id.clone(),
        instantiation_id: instantiation.id.clone(),
        refinement_round: round,
    }
}

/// One generator call. The sample's label is the requested target, whatever
/// label the model states for it.
pub fn generate(
    gateway: &Gateway,
    dimension: &Dimension,
    instantiation: &Instantiation,
    target_label: &Label,
    task: &TaskSpec,
    example_seed: &InputBlock,
) -> Result<CandidateSample, GenerationError> {
    if !task.labels.contains(target_label) {
        return Err(GenerationError::InvalidTargetLabel(target_label.clone()));
    }
    let req = base_request(
        TemplateId::InitialGeneration,
        dimension,
        instantiation,
        target_label,
        task,
        example_seed,
    );
    let c = gateway.complete(&req)?;
    Ok(into_sample(c.value, example_seed, target_label, instantiation, 0))
}

/// Rewrites a rejected sample. The result is one refinement round further on.
#[allow(clippy::too_many_arguments)]
pub fn refine(
    gateway: &Gateway,
    failed: &CandidateSample,
    feedback: &DissentFeedback,
    dimension: &Dimension,
    instantiation: &Instantiation,
    task: &TaskSpec,
    example_seed: &InputBlock,
    config: &GenerationConfig,
) -> Result<CandidateSample, GenerationError> {
    if failed.refinement_round >= config.r_max {
        return Err(GenerationError::RefinementBudgetExhausted {
            round: failed.refinement_round,
            r_max: config.r_max,
        });
    }
    if failed.instantiation_id != instantiation.id || failed.dimension_id != dimension.id {
        return Err(GenerationError::ProvenanceMismatch {
            sample: failed.instantiation_id.clone(),
            given: instantiation.id.clone(),
        });
    }
    let req = base_request(
        TemplateId::Refinement,
        dimension,
        instantiation,
        &failed.target_label,
        task,
        example_seed,
    )
    .with("previous_revised_input_block", &failed.input.content)
    .with("dissenting_reasoning", &feedback.aggregated);
    let c = gateway.complete(&req)?;
    Ok(into_sample(
        c.value,
        &failed.input,
        &failed.target_label,
        instantiation,
        failed.refinement_round + 1,
    ))
}

/// Collects the final-round reasoning of every judge whose last label differs
/// from the target, in judge order.
pub fn aggregate_dissent(transcript: &DebateTranscript) -> Result<DissentFeedback, GenerationError> {
    let last = transcript.rounds.last().ok_or(GenerationError::NothingToAggregate)?;
    let entries: Vec<DissentEntry> = last
        .iter()
        .filter(|t| t.verdict.label != transcript.target_label)
        .map(|t| DissentEntry {
            judge: t.judge,
            persona: t.persona.clone(),
            reasoning: t.verdict.reasoning.clone(),
        })
        .collect();
    if entries.is_empty() {
        return Err(GenerationError::NothingToAggregate);
    }
    let aggregated = entries
        .iter()
        .map(|e| format!("Debater {} ({}):\n{}", e.judge + 1, e.persona, e.reasoning))
        .collect::<Vec<_>>()
        .join("\n\n");
    Ok(DissentFeedback { entries, aggregated })
}

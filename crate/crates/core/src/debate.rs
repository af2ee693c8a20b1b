//! Asymmetric debate validation.
//!
//! A rigid Advocate argues for the sample's target label using the
//! generator's reasoning, unchanged across rounds. A panel of `k` judges
//! evaluates the sample for up to `T` rounds. The sample is valid iff at some
//! round every judge predicts the target label; the debate stops at the first
//! such round. Unanimity on any other label does not stop it.
//!
//! The Advocate issues no model call of its own: its argument is the
//! sample's reasoning, presented to judges as another agent's response.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{CompletionRequest, Gateway, GatewayError, JudgeVerdict, Parsed, ResponseSchema, TemplateId};
use crate::task::{CandidateSample, DatasetRecord, Label, LabelSet, TaskSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DebateError {
    #[error("invalid debate config: {0}")]
    InvalidConfig(String),
    #[error("debate aborted: judge {judge} could not answer in round {round}: {source}")]
    DebateAborted {
        judge: usize,
        round: usize,
        source: GatewayError,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePersona {
    pub persona: String,
    pub instructions: String,
}

impl JudgePersona {
    pub fn new(persona: impl Into<String>, instructions: impl Into<String>) -> Self {
        Self {
            persona: persona.into(),
            instructions: instructions.into(),
        }
    }
}

/// The recall-leaning and the strict, precision-leaning judge.
pub fn default_personas() -> Vec<JudgePersona> {
    static PERSONAS: OnceLock<Vec<JudgePersona>> = OnceLock::new();
    PERSONAS
        .get_or_init(|| {
            serde_json::from_str(include_str!("../templates/personas.json")).expect("persona fixture is valid JSON")
        })
        .clone()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateConfig {
    pub judge_count: usize,
    pub max_rounds: usize,
    pub judge_personas: Vec<JudgePersona>,
    /// Show the Advocate's brief in round 1 too. Off by default: the round-1
    /// judge template has no section for other agents.
    #[serde(default)]
    pub advocate_in_round1: bool,
    /// Query the judges of one round concurrently.
    #[serde(default = "yes")]
    pub concurrent_judges: bool,
}

fn yes() -> bool {
    true
}

impl Default for DebateConfig {
    fn default() -> Self {
        Self {
            judge_count: 2,
            max_rounds: 2,
            judge_personas: default_personas(),
            advocate_in_round1: false,
            concurrent_judges: true,
        }
    }
}

impl DebateConfig {
    /// `k` judges cycling through the default personas. Personas repeat past 2;
    /// they are numbered so prompts still differ.
    pub fn with_judges(judge_count: usize, max_rounds: usize) -> Self {
        let base = default_personas();
        let judge_personas = (0..judge_count)
            .map(|i| {
                let p = &base[i % base.len()];
                if i < base.len() {
                    p.clone()
                } else {
                    JudgePersona::new(format!("{} #{}", p.persona, i + 1), p.instructions.clone())
                }
            })
            .collect();
        Self {
            judge_count,
            max_rounds,
            judge_personas,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DebateError> {
        if self.judge_count == 0 {
            return Err(DebateError::InvalidConfig("judge_count must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(DebateError::InvalidConfig("max_rounds must be at least 1".into()));
        }
        if self.judge_personas.len() != self.judge_count {
            return Err(DebateError::InvalidConfig(format!(
                "{} personas for {} judges",
                self.judge_personas.len(),
                self.judge_count
            )));
        }
        Ok(())
    }
}

/// The Advocate's fixed position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvocateBrief {
    pub target_label: Label,
    pub reasoning: String,
}

impl AdvocateBrief {
    pub fn render(&self, labels: &LabelSet) -> String {
        format!(
            "Advocate:\n- Reasoning: {}\n- Label: {}",
            self.reasoning,
            labels.verdict_word(&self.target_label)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeTurn {
    pub judge: usize,
    pub persona: String,
    pub verdict: JudgeVerdict,
    pub raw: String,
    /// The Advocate block shown to this judge, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advocate_presented: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DebateOutcome {
    Accepted { at_round: usize },
    RejectedConsensusOther { label: Label },
    RejectedDisagreement,
}

impl DebateOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, DebateOutcome::Accepted { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebatePath {
    ImmediateConsensusTarget,
    ImmediateConsensusOther,
    Persuasion,
    ConsensusBreaking,
    SustainedDisagreement,
}

impl DebatePath {
    pub const ALL: [DebatePath; 5] = [
        DebatePath::ImmediateConsensusTarget,
        DebatePath::ImmediateConsensusOther,
        DebatePath::Persuasion,
        DebatePath::ConsensusBreaking,
        DebatePath::SustainedDisagreement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DebatePath::ImmediateConsensusTarget => "immediate_consensus_target",
            DebatePath::ImmediateConsensusOther => "immediate_consensus_other",
            DebatePath::Persuasion => "persuasion",
            DebatePath::ConsensusBreaking => "consensus_breaking",
            DebatePath::SustainedDisagreement => "sustained_disagreement",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRef {
    pub dimension_id: String,
    pub instantiation_id: String,
    pub refinement_round: u32,
    pub input_block: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateTranscript {
    pub id: String,
    pub sample: SampleRef,
    pub target_label: Label,
    pub judge_count: usize,
    pub max_rounds: usize,
    pub advocate: AdvocateBrief,
    /// `rounds[t][i]` is judge `i`'s turn in round `t + 1`.
    pub rounds: Vec<Vec<JudgeTurn>>,
    /// `chi[t][i]`: judge `i` predicted the target label in round `t + 1`.
    pub chi: Vec<Vec<bool>>,
    pub outcome: DebateOutcome,
    pub path: DebatePath,
}

impl DebateTranscript {
    pub fn label_rows(&self) -> Vec<Vec<Label>> {
        self.rounds
            .iter()
            .map(|r| r.iter().map(|t| t.verdict.label.clone()).collect())
            .collect()
    }

    pub fn final_labels(&self) -> Vec<Label> {
        self.label_rows().pop().unwrap_or_default()
    }

    /// Recomputes chi, outcome and path from the recorded verdicts and
    /// checks them against the stored values.
    pub fn is_consistent(&self) -> bool {
        let rows = self.label_rows();
        let chi_ok = self.chi == chi_matrix(&rows, &self.target_label)
            && rows.iter().all(|r| r.len() == self.judge_count)
            && !rows.is_empty()
            && rows.len() <= self.max_rounds;
        chi_ok
            && self.outcome == outcome_of(&rows, &self.target_label)
            && self.path == classify_labels(&rows, &self.target_label)
            && advocate_is_rigid(self)
    }
}

pub fn chi_matrix(rows: &[Vec<Label>], target: &Label) -> Vec<Vec<bool>> {
    rows.iter().map(|r| r.iter().map(|l| l == target).collect()).collect()
}

fn unanimous(row: &[Label]) -> Option<&Label> {
    let first = row.first()?;
    row.iter().all(|l| l == first).then_some(first)
}

/// Outcome of a finished debate from its per-round labels.
pub fn outcome_of(rows: &[Vec<Label>], target: &Label) -> DebateOutcome {
    if let Some(t) = rows.iter().position(|r| r.iter().all(|l| l == target)) {
        return DebateOutcome::Accepted { at_round: t + 1 };
    }
    match rows.last().and_then(|r| unanimous(r)) {
        Some(l) => DebateOutcome::RejectedConsensusOther { label: l.clone() },
        None => DebateOutcome::RejectedDisagreement,
    }
}

/// Debate path from per-round labels.
///
/// Round-1 unanimity on the target is immediate consensus. Round-1 unanimity
/// on another label is consensus breaking if any later round splits, and
/// otherwise immediate consensus on the other label unless a later round
/// reaches unanimity on a different label, which counts as persuasion. A
/// split first round is persuasion if any later round is unanimous, and
/// sustained disagreement otherwise.
pub fn classify_labels(rows: &[Vec<Label>], target: &Label) -> DebatePath {
    let Some(first) = rows.first() else {
        return DebatePath::SustainedDisagreement;
    };
    let later = &rows[1..];
    match unanimous(first) {
        Some(l) if l == target => DebatePath::ImmediateConsensusTarget,
        Some(l) => {
            if later.iter().any(|r| unanimous(r).is_none()) {
                DebatePath::ConsensusBreaking
            } else if later.iter().any(|r| unanimous(r) != Some(l)) {
                DebatePath::Persuasion
            } else {
                DebatePath::ImmediateConsensusOther
            }
        }
        None => {
            if later.iter().any(|r| unanimous(r).is_some()) {
                DebatePath::Persuasion
            } else {
                DebatePath::SustainedDisagreement
            }
        }
    }
}

pub fn classify_path(transcript: &DebateTranscript) -> DebatePath {
    classify_labels(&transcript.label_rows(), &transcript.target_label)
}

/// Whether the transcript accepted its sample.
pub fn valid(transcript: &DebateTranscript) -> bool {
    transcript.outcome.is_accepted()
}

fn advocate_is_rigid(t: &DebateTranscript) -> bool {
    let mut shown = t
        .rounds
        .iter()
        .flatten()
        .filter_map(|turn| turn.advocate_presented.as_deref());
    match shown.next() {
        Some(first) => shown.all(|s| s == first) && first.contains(&t.advocate.reasoning),
        None => true,
    }
}

/// Checks that a dataset record was accepted by this transcript with a
/// consensus on the record's label.
pub fn record_matches_transcript(record: &DatasetRecord, transcript: &DebateTranscript) -> bool {
    record.transcript_id == transcript.id
        && valid(transcript)
        && transcript.target_label == record.sample.target_label
        && transcript
            .final_labels()
            .iter()
            .all(|l| *l == record.sample.target_label)
}

fn format_confidence(c: f64) -> String {
    format!("{c}")
}

fn other_responses(previous: &[JudgeTurn], me: usize, advocate_block: &str, labels: &LabelSet) -> String {
    let mut parts = vec![advocate_block.to_string()];
    for turn in previous.iter().filter(|t| t.judge != me) {
        parts.push(format!(
            "Agent {} ({}):\n- Reasoning: {}\n- Label: {}\n- Confidence: {}",
            turn.judge + 1,
            turn.persona,
            turn.verdict.reasoning,
            labels.verdict_word(&turn.verdict.label),
            format_confidence(turn.verdict.confidence)
        ));
    }
    parts.join("\n\n")
}

#[allow(clippy::too_many_arguments)]
fn judge_request(
    round: usize,
    judge: usize,
    persona: &JudgePersona,
    sample: &CandidateSample,
    task: &TaskSpec,
    previous: Option<&[JudgeTurn]>,
    advocate_block: &str,
    advocate_in_round1: bool,
) -> (CompletionRequest, Option<String>) {
    let base = |id| {
        CompletionRequest::new(id, ResponseSchema::JudgeVerdict)
            .labels(&task.labels)
            .with("persona_instructions", &persona.instructions)
            .with("input_block", &sample.input.content)
            .with("evaluation_criterion", &task.criterion)
    };
    match previous {
        None => {
            let mut req = base(TemplateId::JudgeRound1).with("persona", &persona.persona);
            if advocate_in_round1 {
                req.user_suffix = Some(format!("\n\nOther Agents' Responses:\n{advocate_block}"));
                (req, Some(advocate_block.to_string()))
            } else {
                (req, None)
            }
        }
        Some(prev) => {
            let own = &prev[judge];
            let req = base(TemplateId::JudgeRoundN)
                .with("persona", &persona.persona)
                .with("round", round.to_string())
                .with("own_reasoning", &own.verdict.reasoning)
                .with("own_label", task.labels.verdict_word(&own.verdict.label))
                .with("own_confidence", format_confidence(own.verdict.confidence))
                .with(
                    "previous_responses",
                    other_responses(prev, judge, advocate_block, &task.labels),
                );
            (req, Some(advocate_block.to_string()))
        }
    }
}

fn ask_judge(
    gateway: &Gateway,
    round: usize,
    judge: usize,
    persona: &JudgePersona,
    request: CompletionRequest,
    advocate_presented: Option<String>,
) -> Result<JudgeTurn, DebateError> {
    match gateway.complete(&request) {
        Ok(c) => {
            let Parsed::Verdict(verdict) = c.value else {
                unreachable!("judge verdict schema")
            };
            Ok(JudgeTurn {
                judge,
                persona: persona.persona.clone(),
                verdict,
                raw: c.raw,
                advocate_presented,
            })
        }
        Err(e @ GatewayError::Parse { .. }) => Err(DebateError::DebateAborted {
            judge,
            round,
            source: e,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Runs the debate for one sample. Total judge calls are `k * rounds_run`.
pub fn run_debate(
    gateway: &Gateway,
    sample: &CandidateSample,
    task: &TaskSpec,
    config: &DebateConfig,
    transcript_id: impl Into<String>,
) -> Result<DebateTranscript, DebateError> {
    config.validate()?;
    let advocate = AdvocateBrief {
        target_label: sample.target_label.clone(),
        reasoning: sample.reasoning.clone(),
    };
    let advocate_block = advocate.render(&task.labels);
    let target = &sample.target_label;
    let mut rounds: Vec<Vec<JudgeTurn>> = Vec::new();

    for round in 1..=config.max_rounds {
        let previous = rounds.last().map(Vec::as_slice);
        let requests: Vec<_> = config
            .judge_personas
            .iter()
            .enumerate()
            .map(|(i, p)| {
                judge_request(
                    round,
                    i,
                    p,
                    sample,
                    task,
                    previous,
                    &advocate_block,
                    config.advocate_in_round1,
                )
            })
            .collect();
        let results: Vec<Result<JudgeTurn, DebateError>> = if config.concurrent_judges && requests.len() > 1 {
            std::thread::scope(|s| {
                let handles: Vec<_> = requests
                    .into_iter()
                    .enumerate()
                    .map(|(i, (req, shown))| {
                        let persona = &config.judge_personas[i];
                        s.spawn(move || ask_judge(gateway, round, i, persona, req, shown))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("judge thread")).collect()
            })
        } else {
            requests
                .into_iter()
                .enumerate()
                .map(|(i, (req, shown))| ask_judge(gateway, round, i, &config.judge_personas[i], req, shown))
                .collect()
        };
        let turns = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let done = turns.iter().all(|t| &t.verdict.label == target);
        rounds.push(turns);
        if done {
            break;
        }
    }

    let rows: Vec<Vec<Label>> = rounds
        .iter()
        .map(|r| r.iter().map(|t| t.verdict.label.clone()).collect())
        .collect();
    Ok(DebateTranscript {
        id: transcript_id.into(),
        sample: SampleRef {
            dimension_id: sample.dimension_id.clone(),
            instantiation_id: sample.instantiation_id.clone(),
            refinement_round: sample.refinement_round,
            input_block: sample.input.content.clone(),
        },
        target_label: target.clone(),
        judge_count: config.judge_count,
        max_rounds: config.max_rounds,
        advocate,
        chi: chi_matrix(&rows, target),
        outcome: outcome_of(&rows, target),
        path: classify_labels(&rows, target),
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{MockRule, ScriptedBackend};
    use crate::task::{InputBlock, InputKind};
    use serde_json::json;

    fn l(s: &str) -> Label {
        Label::from(s)
    }

    fn rows(spec: &[&[&str]]) -> Vec<Vec<Label>> {
        spec.iter().map(|r| r.iter().map(|x| l(x)).collect()).collect()
    }

    #[test]
    fn path_examples() {
        let t = l("0");
        assert_eq!(
            classify_labels(&rows(&[&["1", "0"], &["0", "0"]]), &t),
            DebatePath::Persuasion
        );
        assert_eq!(
            classify_labels(&rows(&[&["1", "1"], &["1", "0"]]), &t),
            DebatePath::ConsensusBreaking
        );
        assert_eq!(
            classify_labels(&rows(&[&["1", "0"], &["0", "1"]]), &t),
            DebatePath::SustainedDisagreement
        );
        assert_eq!(
            classify_labels(&rows(&[&["0", "0"]]), &t),
            DebatePath::ImmediateConsensusTarget
        );
        assert_eq!(
            classify_labels(&rows(&[&["1", "1"]]), &t),
            DebatePath::ImmediateConsensusOther
        );
        assert_eq!(
            classify_labels(&rows(&[&["1", "1"], &["1", "1"]]), &t),
            DebatePath::ImmediateConsensusOther
        );
        assert_eq!(
            classify_labels(&rows(&[&["1", "1"], &["0", "0"]]), &t),
            DebatePath::Persuasion
        );
    }

    #[test]
    fn outcomes() {
        let t = l("0");
        assert_eq!(
            outcome_of(&rows(&[&["0", "1"], &["1", "0"]]), &t),
            DebateOutcome::RejectedDisagreement
        );
        assert_eq!(
            outcome_of(&rows(&[&["1", "0"], &["0", "0"]]), &t),
            DebateOutcome::Accepted { at_round: 2 }
        );
        assert_eq!(
            outcome_of(&rows(&[&["1", "1"], &["1", "1"]]), &t),
            DebateOutcome::RejectedConsensusOther { label: l("1") }
        );
    }

    fn task() -> TaskSpec {
        TaskSpec::new(
            "The answer contains health advice.",
            LabelSet::binary(),
            vec![InputBlock::new("Q: hi\nA: hello", InputKind::Freeform)],
        )
    }

    fn sample(target: &str) -> CandidateSample {
        CandidateSample {
            input: InputBlock::new(
                "Q: conjunctivitis types?\nA: bacterial, viral, neonatal.",
                InputKind::Freeform,
            ),
            target_label: l(target),
            reasoning: "Describes categories without recommending any action.".into(),
            dimension_id: "d0".into(),
            instantiation_id: "d0-v0".into(),
            refinement_round: 0,
        }
    }

    fn verdict(label: &str) -> serde_json::Value {
        let word = if label == "1" { "True" } else { "False" };
        json!({"reasoning": format!("judge says {word}"), "confidence": 0.8, "label": word})
    }

    /// Scripts judge `i` to answer `labels[t]` in round `t + 1`.
    fn scripted(per_judge: &[&[&str]]) -> Gateway {
        let personas = default_personas();
        let mut rules = Vec::new();
        for (i, seq) in per_judge.iter().enumerate() {
            rules.push(
                MockRule::new(TemplateId::JudgeRound1)
                    .when("persona", personas[i].persona.clone())
                    .respond(verdict(seq[0])),
            );
            if seq.len() > 1 {
                rules.push(
                    MockRule::new(TemplateId::JudgeRoundN)
                        .when("persona", personas[i].persona.clone())
                        .respond_seq(seq[1..].iter().map(|x| verdict(x)))
                        .exhaust(),
                );
            }
        }
        Gateway::with_backend(ScriptedBackend::new(rules))
    }

    #[test]
    fn repetition_example_is_rejected_for_disagreement() {
        // round 1: 0, 1; round 2: 1, 0; target 0
        let gw = scripted(&[&["0", "1"], &["1", "0"]]);
        let t = run_debate(&gw, &sample("0"), &task(), &DebateConfig::default(), "t").unwrap();
        assert_eq!(t.outcome, DebateOutcome::RejectedDisagreement);
        assert_eq!(t.path, DebatePath::SustainedDisagreement);
        assert_eq!(t.chi, vec![vec![true, false], vec![false, true]]);
        assert!(!valid(&t));
        assert!(t.is_consistent());
    }

    #[test]
    fn persuasion_accepts_at_round_two() {
        let gw = scripted(&[&["1", "0"], &["0"]]);
        let cfg = DebateConfig {
            concurrent_judges: false,
            ..DebateConfig::default()
        };
        // judge 2 agrees in round 1 and must still answer round 2
        let gw2 = scripted(&[&["1", "0"], &["0", "0"]]);
        let t = run_debate(&gw2, &sample("0"), &task(), &cfg, "t").unwrap();
        assert_eq!(t.outcome, DebateOutcome::Accepted { at_round: 2 });
        assert_eq!(t.path, DebatePath::Persuasion);
        assert_eq!(gw2.calls_for(TemplateId::JudgeRoundN), 2);
        assert!(valid(&t) && t.is_consistent());
        // without a round-2 script for judge 2 the request is unscripted
        assert!(matches!(
            run_debate(&gw, &sample("0"), &task(), &cfg, "t"),
            Err(DebateError::Gateway(GatewayError::UnscriptedRequest { .. }))
        ));
    }

    #[test]
    fn immediate_consensus_issues_exactly_k_calls() {
        let gw = scripted(&[&["1"], &["1"]]);
        let t = run_debate(&gw, &sample("1"), &task(), &DebateConfig::default(), "t").unwrap();
        assert_eq!(t.outcome, DebateOutcome::Accepted { at_round: 1 });
        assert_eq!(gw.completions_used(), 2);
        assert_eq!(t.rounds.len(), 1);
    }

    #[test]
    fn wrong_consensus_continues_to_next_round() {
        let gw = scripted(&[&["1", "1"], &["1", "0"]]);
        let t = run_debate(&gw, &sample("0"), &task(), &DebateConfig::default(), "t").unwrap();
        assert_eq!(t.rounds.len(), 2);
        assert_eq!(t.path, DebatePath::ConsensusBreaking);
    }

    #[test]
    fn advocate_is_shown_from_round_two_and_never_changes() {
        let gw = scripted(&[&["1", "1", "1"], &["0", "1", "0"]]);
        let cfg = DebateConfig {
            max_rounds: 3,
            ..DebateConfig::default()
        };
        let t = run_debate(&gw, &sample("0"), &task(), &cfg, "t").unwrap();
        assert!(t.rounds[0].iter().all(|turn| turn.advocate_presented.is_none()));
        let shown: Vec<_> = t.rounds[1..]
            .iter()
            .flatten()
            .map(|turn| turn.advocate_presented.clone().unwrap())
            .collect();
        assert_eq!(shown.len(), 4);
        assert!(shown.iter().all(|s| s == &shown[0]));
        assert!(shown[0].contains("Describes categories without recommending any action."));
        assert!(shown[0].ends_with("- Label: False"));
        assert!(t.is_consistent());
    }

    #[test]
    fn round_n_prompt_carries_own_and_other_responses() {
        let backend = std::sync::Arc::new(ScriptedBackend::new(vec![
            MockRule::new(TemplateId::JudgeRound1)
                .when("persona", "strict")
                .respond(verdict("1")),
            MockRule::new(TemplateId::JudgeRound1).respond(verdict("0")),
            MockRule::new(TemplateId::JudgeRoundN).respond(verdict("0")),
        ]));
        let gw = Gateway::new(backend.clone(), Default::default());
        run_debate(&gw, &sample("0"), &task(), &DebateConfig::default(), "t").unwrap();
        let strict_round2 = backend
            .calls()
            .into_iter()
            .find(|c| c.template == TemplateId::JudgeRoundN && c.placeholders["persona"] == "strict")
            .unwrap();
        let p = &strict_round2.placeholders;
        assert_eq!(p["own_label"], "True");
        assert_eq!(p["own_confidence"], "0.8");
        assert!(p["previous_responses"].starts_with("Advocate:\n- Reasoning: Describes"));
        assert!(p["previous_responses"].contains("Agent 1 (recall-oriented):\n- Reasoning: judge says False"));
        assert!(!p["previous_responses"].contains("Agent 2"));
    }

    #[test]
    fn advocate_in_round1_flag() {
        let backend = std::sync::Arc::new(ScriptedBackend::new(vec![MockRule::new(TemplateId::JudgeRound1)
            .contains("Other Agents' Responses:\nAdvocate:")
            .respond(verdict("1"))]));
        let gw = Gateway::new(backend, Default::default());
        let cfg = DebateConfig {
            advocate_in_round1: true,
            ..DebateConfig::default()
        };
        let t = run_debate(&gw, &sample("1"), &task(), &cfg, "t").unwrap();
        assert!(t.rounds[0][0].advocate_presented.is_some());
    }

    #[test]
    fn judge_parse_failure_aborts() {
        let gw = Gateway::with_backend(ScriptedBackend::new(vec![
            MockRule::new(TemplateId::JudgeRound1).respond("meh")
        ]));
        let err = run_debate(&gw, &sample("1"), &task(), &DebateConfig::default(), "t").unwrap_err();
        assert!(matches!(err, DebateError::DebateAborted { round: 1, .. }), "{err:?}");
    }

    #[test]
    fn config_validation() {
        let cfg = DebateConfig {
            judge_count: 3,
            ..DebateConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(DebateConfig::with_judges(3, 2).validate().is_ok());
        assert!(DebateConfig::with_judges(2, 0).validate().is_err());
        assert_eq!(
            DebateConfig::with_judges(3, 1).judge_personas[2].persona,
            "recall-oriented #3"
        );
    }

    #[test]
    fn transcript_serde_round_trip() {
        let gw = scripted(&[&["1", "0"], &["0", "0"]]);
        let t = run_debate(&gw, &sample("0"), &task(), &DebateConfig::default(), "t").unwrap();
        let line = serde_json::to_string(&t).unwrap();
        let back: DebateTranscript = serde_json::from_str(&line).unwrap();
        assert_eq!(back, t);
    }
}

//! Dimension decomposition: extract task-relevant axes of variation from seed
//! examples, drop near-duplicates, and elicit a weighted set of concrete
//! instantiations per axis by asking the model for a distribution rather
//! than a single answer.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatMessage, CompletionRequest, Gateway, GatewayError, Parsed, ResponseSchema, Role, TemplateId};
use crate::task::{Label, TaskSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model returned no dimensions after {attempts} attempts")]
    NoDimensionsExtracted { attempts: u32 },
    #[error("model returned no instantiations for dimension {dimension_id} after {attempts} attempts")]
    NoInstantiations { dimension_id: String, attempts: u32 },
    #[error("seed subset size {requested} exceeds the {available} available seeds")]
    InvalidSubsetSize { requested: usize, available: usize },
    #[error("similarity threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub id: String,
    pub description: String,
}

impl Dimension {
    pub fn new(id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
        }
    }
}

/// One concrete value of a dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instantiation {
    pub id: String,
    pub dimension_id: String,
    pub text: String,
    /// Labels this instantiation can support; never empty.
    pub label_relevance: Vec<Label>,
    /// Verbalized probability in (0, 1]. Recorded as elicited, not renormalized.
    pub weight: f64,
}

impl Instantiation {
    pub fn supports(&self, label: &Label) -> bool {
        self.label_relevance.contains(label)
    }
}

/// Dimensions and instantiations frozen before any sample is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub dimensions: Vec<Dimension>,
    pub instantiations: Vec<Instantiation>,
    /// Indices into the task's seeds used for extraction.
    pub seed_indices: Vec<usize>,
    pub candidates_extracted: usize,
}

impl Decomposition {
    pub fn instantiations_for(&self, dimension_id: &str) -> Vec<&Instantiation> {
        self.instantiations
            .iter()
            .filter(|v| v.dimension_id == dimension_id)
            .collect()
    }

    pub fn instantiation(&self, id: &str) -> Option<&Instantiation> {
        self.instantiations.iter().find(|v| v.id == id)
    }

    pub fn dimension(&self, id: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.id == id)
    }

    /// Every instantiation references a dimension that exists, and every
    /// dimension has at least one instantiation.
    pub fn is_consistent(&self) -> bool {
        self.instantiations
            .iter()
            .all(|v| self.dimension(&v.dimension_id).is_some())
            && self
                .dimensions
                .iter()
                .all(|d| !self.instantiations_for(&d.id).is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeConfig {
    /// Seeds shown to the extractor; `None` means `min(5, |seeds|)`.
    pub seed_subset_size: Option<usize>,
    /// Candidates more similar than this to an earlier candidate are dropped.
    /// At 1.0 only exact duplicates are removed and no model calls are made.
    pub dedup_threshold: f64,
    pub attempts: u32,
    pub rng_seed: u64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            seed_subset_size: None,
            dedup_threshold: 0.85,
            attempts: 3,
            rng_seed: 0,
        }
    }
}

/// Pairwise semantic similarity in [0, 1].
pub trait SimilarityOracle {
    fn similarity(&self, a: &Dimension, b: &Dimension) -> Result<f64, GatewayError>;
}

impl<F> SimilarityOracle for F
where
    F: Fn(&Dimension, &Dimension) -> f64,
{
    fn similarity(&self, a: &Dimension, b: &Dimension) -> Result<f64, GatewayError> {
        Ok(self(a, b))
    }
}

/// Similarity judged by the model through the `dimension_similarity` template.
pub struct GatewaySimilarity<'a> {
    pub gateway: &'a Gateway,
    pub criterion: &'a str,
}

impl SimilarityOracle for GatewaySimilarity<'_> {
    fn similarity(&self, a: &Dimension, b: &Dimension) -> Result<f64, GatewayError> {
        let req = CompletionRequest::new(TemplateId::DimensionSimilarity, ResponseSchema::RelevanceScore)
            .with("evaluation_criterion", self.criterion)
            .with("dimension_a", &a.description)
            .with("dimension_b", &b.description);
        match self.gateway.complete(&req)?.value {
            Parsed::Score(s) => Ok(s),
            other => unreachable!("relevance schema parsed as {other:?}"),
        }
    }
}

fn normalized(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Drops every candidate that duplicates, or is judged more similar than
/// `threshold` to, any earlier candidate. Survivors keep their input order.
///
/// Comparing against all earlier candidates (not only earlier survivors)
/// makes the result idempotent and monotone in the threshold.
pub fn dedup(
    candidates: Vec<Dimension>,
    threshold: f64,
    oracle: &dyn SimilarityOracle,
) -> Result<Vec<Dimension>, DimensionError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(DimensionError::InvalidThreshold(threshold));
    }
    let keys: Vec<String> = candidates.iter().map(|d| normalized(&d.description)).collect();
    let mut keep = vec![true; candidates.len()];
    for i in 1..candidates.len() {
        for j in 0..i {
            if keys[i] == keys[j] {
                keep[i] = false;
                break;
            }
        }
        if !keep[i] || threshold >= 1.0 {
            continue;
        }
        for j in 0..i {
            if oracle.similarity(&candidates[j], &candidates[i])? > threshold {
                keep[i] = false;
                break;
            }
        }
    }
    Ok(candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(d, k)| k.then_some(d))
        .collect())
}

/// Conversation that produced a set of candidate dimensions; instantiation
/// prompts are sent as a follow-up to it.
#[derive(Debug, Clone)]
pub struct ExtractionTurn {
    pub seed_index: usize,
    pub messages: Vec<ChatMessage>,
    pub raw: String,
}

impl ExtractionTurn {
    fn history(&self) -> Vec<ChatMessage> {
        let mut h = self.messages.clone();
        h.push(ChatMessage::new(Role::Assistant, self.raw.clone()));
        h
    }
}

#[derive(Debug, Clone)]
pub struct Extracted {
    pub dimensions: Vec<Dimension>,
    /// For each dimension, the index into `turns` it came from.
    pub sources: Vec<usize>,
    pub turns: Vec<ExtractionTurn>,
    pub seed_indices: Vec<usize>,
    pub candidates_extracted: usize,
}

/// Extracts candidate dimensions from a random subset of seeds (one
/// extraction call per seed), retrying when every call comes back empty,
/// then deduplicates them.
pub fn decompose(
    gateway: &Gateway,
    task: &TaskSpec,
    run_id: &str,
    config: &DecomposeConfig,
) -> Result<Extracted, DimensionError> {
    let available = task.seeds.len();
    let subset = config.seed_subset_size.unwrap_or(available.min(5));
    if subset > available || subset == 0 {
        return Err(DimensionError::InvalidSubsetSize {
            requested: subset,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut seed_indices = sample(&mut rng, available, subset).into_vec();
    seed_indices.sort_unstable();

    let attempts = config.attempts.max(1);
    let mut turns = Vec::new();
    let mut candidates = Vec::new();
    let mut sources = Vec::new();
    for _ in 0..attempts {
        turns.clear();
        for &seed in &seed_indices {
            let req = CompletionRequest::new(TemplateId::DimensionExtraction, ResponseSchema::DimensionList)
                .with("evaluation_criterion", &task.criterion)
                .with("input_block", &task.seeds[seed].content);
            let completion = gateway.complete(&req)?;
            let Parsed::Dimensions(found) = completion.value else {
                unreachable!("dimension list schema")
            };
            for description in found {
                candidates.push(Dimension::new(format!("candidate-{}", candidates.len()), description));
                sources.push(turns.len());
            }
            turns.push(ExtractionTurn {
                seed_index: seed,
                messages: completion.messages,
                raw: completion.raw,
            });
        }
        if !candidates.is_empty() {
            break;
        }
    }
    if candidates.is_empty() {
        return Err(DimensionError::NoDimensionsExtracted { attempts });
    }
    let candidates_extracted = candidates.len();
    let source_of: BTreeMap<String, usize> = candidates
        .iter()
        .map(|d| d.id.clone())
        .zip(sources.iter().copied())
        .collect();
    let oracle = GatewaySimilarity {
        gateway,
        criterion: &task.criterion,
    };
    let survivors = dedup(candidates, config.dedup_threshold, &oracle)?;
    let sources = survivors.iter().map(|d| source_of[&d.id]).collect();
    let dimensions = survivors
        .into_iter()
        .enumerate()
        .map(|(i, d)| Dimension::new(format!("{run_id}-d{i}"), d.description))
        .collect();
    Ok(Extracted {
        dimensions,
        sources,
        turns,
        seed_indices,
        candidates_extracted,
    })
}

/// Elicits instantiations for one dimension. `history` is the extraction
/// conversation the dimension came from (may be empty).
pub fn instantiate(
    gateway: &Gateway,
    dimension: &Dimension,
    task: &TaskSpec,
    history: Vec<ChatMessage>,
    attempts: u32,
) -> Result<Vec<Instantiation>, DimensionError> {
    let attempts = attempts.max(1);
    for _ in 0..attempts {
        let req = CompletionRequest::new(TemplateId::DimensionInstantiation, ResponseSchema::InstantiationList)
            .with("dimension", &dimension.description)
            .labels(&task.labels)
            .history(history.clone());
        let Parsed::Instantiations(raw) = gateway.complete(&req)?.value else {
            unreachable!("instantiation list schema")
        };
        if !raw.is_empty() {
            return Ok(raw
                .into_iter()
                .enumerate()
                .map(|(j, r)| Instantiation {
                    id: format!("{}-v{j}", dimension.id),
                    dimension_id: dimension.id.clone(),
                    text: r.text,
                    label_relevance: r.label_relevance,
                    weight: r.weight,
                })
                .collect());
        }
    }
    Err(DimensionError::NoInstantiations {
        dimension_id: dimension.id.clone(),
        attempts,
    })
}

/// Extraction, dedup and per-dimension instantiation. Instantiation calls for
/// different dimensions run concurrently; results keep dimension order.
pub fn decompose_and_instantiate(
    gateway: &Gateway,
    task: &TaskSpec,
    run_id: &str,
    config: &DecomposeConfig,
) -> Result<Decomposition, DimensionError> {
    let extracted = decompose(gateway, task, run_id, config)?;
    let results: Vec<Result<Vec<Instantiation>, DimensionError>> = std::thread::scope(|s| {
        let handles: Vec<_> = extracted
            .dimensions
            .iter()
            .zip(&extracted.sources)
            .map(|(dim, &src)| {
                let history = extracted.turns[src].history();
                s.spawn(move || instantiate(gateway, dim, task, history, config.attempts))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("instantiation thread"))
            .collect()
    });
    let mut instantiations = Vec::new();
    for r in results {
        instantiations.extend(r?);
    }
    Ok(Decomposition {
        dimensions: extracted.dimensions,
        instantiations,
        seed_indices: extracted.seed_indices,
        candidates_extracted: extracted.candidates_extracted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{MockRule, ScriptedBackend};
    use crate::task::{InputBlock, InputKind, LabelSet};
    use proptest::prelude::*;
    use serde_json::json;

    fn task() -> TaskSpec {
        TaskSpec::new(
            "If a user repeats or rephrases the same message 3 times, respond with a specific redirect message.",
            LabelSet::binary(),
            (0..3)
                .map(|i| InputBlock::new(format!("User: question {i}\nAgent: answer"), InputKind::Dialogue))
                .collect(),
        )
    }

    fn dims(texts: &[&str]) -> Vec<Dimension> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Dimension::new(format!("c{i}"), *t))
            .collect()
    }

    #[test]
    fn paraphrase_above_threshold_is_dropped() {
        let oracle = |_: &Dimension, _: &Dimension| 0.9;
        let out = dedup(dims(&["antonym swaps", "opposite-word substitution"]), 0.8, &oracle).unwrap();
        assert_eq!(out, dims(&["antonym swaps"]));
    }

    #[test]
    fn disjoint_pair_kept() {
        let oracle = |_: &Dimension, _: &Dimension| 0.1;
        let input = dims(&["antonym swaps", "position of the repeated message"]);
        assert_eq!(dedup(input.clone(), 0.8, &oracle).unwrap(), input);
    }

    #[test]
    fn single_and_empty_unchanged() {
        let oracle = |_: &Dimension, _: &Dimension| -> f64 { panic!("no comparison expected") };
        assert_eq!(dedup(dims(&["a"]), 0.5, &oracle).unwrap(), dims(&["a"]));
        assert!(dedup(vec![], 0.5, &oracle).unwrap().is_empty());
    }

    #[test]
    fn exact_duplicates_collapse_without_oracle() {
        let oracle = |_: &Dimension, _: &Dimension| -> f64 { panic!("no comparison expected") };
        let out = dedup(dims(&["Antonym  swaps", "antonym swaps"]), 1.0, &oracle).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "c0");
    }

    #[test]
    fn threshold_out_of_range() {
        let oracle = |_: &Dimension, _: &Dimension| 0.0;
        assert_eq!(dedup(vec![], 1.5, &oracle), Err(DimensionError::InvalidThreshold(1.5)));
    }

    // Greedy "compare only with survivors" would keep {A, B} at 0.8 but {A, C}
    // at 0.6, breaking monotonicity; comparing with every earlier candidate does not.
    #[test]
    fn chain_of_paraphrases_is_monotone() {
        let sims: BTreeMap<(&str, &str), f64> = [(("c0", "c1"), 0.7), (("c1", "c2"), 0.9), (("c0", "c2"), 0.5)]
            .into_iter()
            .collect();
        let oracle = move |a: &Dimension, b: &Dimension| sims[&(a.id.as_str(), b.id.as_str())];
        let low = dedup(dims(&["A", "B", "C"]), 0.6, &oracle).unwrap();
        let high = dedup(dims(&["A", "B", "C"]), 0.8, &oracle).unwrap();
        assert_eq!(low.iter().map(|d| d.description.as_str()).collect::<Vec<_>>(), ["A"]);
        assert_eq!(
            high.iter().map(|d| d.description.as_str()).collect::<Vec<_>>(),
            ["A", "B"]
        );
    }

    fn matrix_oracle(n: usize, values: Vec<f64>) -> impl Fn(&Dimension, &Dimension) -> f64 {
        move |a: &Dimension, b: &Dimension| {
            let i: usize = a.id[1..].parse().unwrap();
            let j: usize = b.id[1..].parse().unwrap();
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            values[lo * n + hi]
        }
    }

    proptest! {
        #[test]
        fn dedup_is_idempotent_and_monotone(
            values in proptest::collection::vec(0.0f64..=1.0, 64),
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
        ) {
            let n = 8;
            let input: Vec<Dimension> = (0..n).map(|i| Dimension::new(format!("c{i}"), format!("dimension {i}"))).collect();
            let oracle = matrix_oracle(n, values);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let once = dedup(input.clone(), lo, &oracle).unwrap();
            let twice = dedup(once.clone(), lo, &oracle).unwrap();
            prop_assert_eq!(&once, &twice);
            let relaxed = dedup(input, hi, &oracle).unwrap();
            for d in &once {
                prop_assert!(relaxed.contains(d));
            }
            for (i, a) in once.iter().enumerate() {
                for b in &once[i + 1..] {
                    prop_assert!(oracle(a, b) <= lo);
                }
            }
        }
    }

    #[test]
    fn decompose_collapses_verbatim_duplicates() {
        let gw = Gateway::with_backend(ScriptedBackend::new(vec![MockRule::new(
            TemplateId::DimensionExtraction,
        )
        .respond(json!({"dimensions": [
                {"name": "Antonyms", "description": "Substitution of antonyms that invert meaning"},
                {"name": "Antonyms", "description": "Substitution of antonyms that invert meaning"}]}))]));
        let cfg = DecomposeConfig {
            seed_subset_size: Some(1),
            ..DecomposeConfig::default()
        };
        let out = decompose(&gw, &task(), "run", &cfg).unwrap();
        assert_eq!(out.dimensions.len(), 1);
        assert_eq!(out.dimensions[0].id, "run-d0");
        assert_eq!(out.candidates_extracted, 2);
        assert_eq!(gw.calls_for(TemplateId::DimensionSimilarity), 0);
    }

    #[test]
    fn decompose_uses_similarity_model() {
        let gw = Gateway::with_backend(ScriptedBackend::new(vec![
            MockRule::new(TemplateId::DimensionExtraction)
                .respond(json!({"dimensions": ["antonym swaps", "opposite-word substitution", "turn position"]})),
            MockRule::new(TemplateId::DimensionSimilarity)
                .when("dimension_a", "antonym swaps")
                .when("dimension_b", "opposite-word substitution")
                .respond("0.93"),
            MockRule::new(TemplateId::DimensionSimilarity).respond("0.1"),
        ]));
        let cfg = DecomposeConfig {
            seed_subset_size: Some(1),
            ..DecomposeConfig::default()
        };
        let out = decompose(&gw, &task(), "run", &cfg).unwrap();
        let kept: Vec<_> = out.dimensions.iter().map(|d| d.description.as_str()).collect();
        assert_eq!(kept, ["antonym swaps", "turn position"]);
    }

    #[test]
    fn empty_extraction_thrice_fails() {
        let gw = Gateway::with_backend(ScriptedBackend::new(vec![MockRule::new(
            TemplateId::DimensionExtraction,
        )
        .respond_seq([
            json!({"dimensions": []}),
            json!({"dimensions": []}),
            json!({"dimensions": []}),
        ])
        .exhaust()]));
        let cfg = DecomposeConfig {
            seed_subset_size: Some(1),
            ..DecomposeConfig::default()
        };
        assert_eq!(
            decompose(&gw, &task(), "run", &cfg).unwrap_err(),
            DimensionError::NoDimensionsExtracted { attempts: 3 }
        );
        assert_eq!(gw.calls_for(TemplateId::DimensionExtraction), 3);
    }

    #[test]
    fn subset_larger_than_seeds() {
        let gw = Gateway::with_backend(ScriptedBackend::new(vec![]));
        let cfg = DecomposeConfig {
            seed_subset_size: Some(4),
            ..DecomposeConfig::default()
        };
        assert!(matches!(
            decompose(&gw, &task(), "run", &cfg),
            Err(DimensionError::InvalidSubsetSize {
                requested: 4,
                available: 3
            })
        ));
    }

    #[test]
    fn instantiate_records_relevance_and_raw_weights() {
        let gw = Gateway::with_backend(ScriptedBackend::new(vec![MockRule::new(
            TemplateId::DimensionInstantiation,
        )
        .respond(json!({"instantiations": [
                {"text": "small lexical swaps are semantically significant", "relevance": "False", "probability": 0.5},
                {"text": "verbatim repetition", "relevance": "True", "probability": 0.3},
                {"text": "paraphrase with synonyms", "relevance": "Both", "probability": 0.4}]}))]));
        let dim = Dimension::new("run-d0", "Substitution of antonyms that invert meaning");
        let vs = instantiate(&gw, &dim, &task(), vec![], 3).unwrap();
        assert_eq!(vs.len(), 3);
        assert_eq!(vs[0].id, "run-d0-v0");
        assert_eq!(vs[0].text, "small lexical swaps are semantically significant");
        assert_eq!(vs.iter().map(|v| v.weight).collect::<Vec<_>>(), [0.5, 0.3, 0.4]);
        assert!(vs[2].supports(&"0".into()) && vs[2].supports(&"1".into()));
    }

    #[test]
    fn instantiation_prompt_follows_extraction_conversation() {
        let backend = std::sync::Arc::new(ScriptedBackend::new(vec![
            MockRule::new(TemplateId::DimensionExtraction).respond(json!({"dimensions": ["turn position"]})),
            MockRule::new(TemplateId::DimensionInstantiation)
                .contains("<EXAMPLE_INPUT_BLOCK>")
                .respond(json!([{"text": "last turn", "relevance": "Both", "probability": 1.0}])),
        ]));
        let gw = Gateway::new(backend.clone(), Default::default());
        let cfg = DecomposeConfig {
            seed_subset_size: Some(2),
            dedup_threshold: 1.0,
            ..DecomposeConfig::default()
        };
        let d = decompose_and_instantiate(&gw, &task(), "run", &cfg).unwrap();
        // Two seeds each yielded "turn position"; the duplicate collapses.
        assert_eq!(d.dimensions.len(), 1);
        assert_eq!(d.instantiations.len(), 1);
        assert_eq!(d.instantiations[0].weight, 1.0);
        assert!(d.is_consistent());
        assert_eq!(d.seed_indices.len(), 2);
    }

    #[test]
    fn no_instantiations() {
        let gw = Gateway::with_backend(ScriptedBackend::new(vec![MockRule::new(
            TemplateId::DimensionInstantiation,
        )
        .respond("[]")]));
        let dim = Dimension::new("d", "x");
        assert!(matches!(
            instantiate(&gw, &dim, &task(), vec![], 2),
            Err(DimensionError::NoInstantiations { attempts: 2, .. })
        ));
    }
}

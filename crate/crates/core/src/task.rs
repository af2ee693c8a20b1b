//! Shared domain types: tasks, labels, samples and accepted records.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("task has no seed examples")]
    EmptySeeds,
    #[error("label set needs at least 2 distinct labels, got {0}")]
    DegenerateLabelSet(usize),
    #[error("label {0:?} appears more than once in the label set")]
    DuplicateLabel(String),
    #[error("task criterion is empty")]
    EmptyCriterion,
    #[error("seed {0} has empty content")]
    EmptySeed(usize),
}

/// An opaque label value. Binary tasks conventionally use `"0"` and `"1"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub String);

impl Label {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Ordered set of label values for a task.
///
/// For binary tasks the first label is the negative class (the criterion does
/// not hold, token `"0"`, verdict `False`) and the second is the positive class
/// (token `"1"`, verdict `True`). A binary set spelled exactly `{"0","1"}` maps
/// onto itself regardless of order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet(Vec<Label>);

impl LabelSet {
    pub fn new<I, L>(labels: I) -> Self
    where
        I: IntoIterator<Item = L>,
        L: Into<Label>,
    {
        Self(labels.into_iter().map(Into::into).collect())
    }

    pub fn binary() -> Self {
        Self::new(["0", "1"])
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.0.len() == 2
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.0.contains(label)
    }

    pub fn index_of(&self, label: &Label) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }

    fn is_literal_binary(&self) -> bool {
        self.is_binary() && self.contains(&Label::from("0")) && self.contains(&Label::from("1"))
    }

    /// Positive-class index for binary sets.
    fn positive_index(&self) -> Option<usize> {
        if !self.is_binary() {
            return None;
        }
        if self.is_literal_binary() {
            self.index_of(&Label::from("1"))
        } else {
            Some(1)
        }
    }

    /// Canonical single-character token used in classification prompts and
    /// dataset files. `None` when the set cannot be rendered with one
    /// character per label.
    pub fn token(&self, label: &Label) -> Option<String> {
        let idx = self.index_of(label)?;
        if let Some(pos) = self.positive_index() {
            return Some(if idx == pos { "1" } else { "0" }.to_string());
        }
        if self.0.iter().all(|l| l.0.chars().count() == 1) {
            return Some(label.0.clone());
        }
        if self.0.len() <= 10 {
            return Some(idx.to_string());
        }
        None
    }

    pub fn from_token(&self, token: &str) -> Option<Label> {
        self.0.iter().find(|l| self.token(l).as_deref() == Some(token)).cloned()
    }

    /// Token mapping in label order, stored in run manifests.
    pub fn token_map(&self) -> Option<Vec<(Label, String)>> {
        self.0.iter().map(|l| self.token(l).map(|t| (l.clone(), t))).collect()
    }

    /// The word used for this label in generator and judge prompts:
    /// `True`/`False` for binary sets, the label value otherwise.
    pub fn verdict_word(&self, label: &Label) -> String {
        match (self.positive_index(), self.index_of(label)) {
            (Some(pos), Some(idx)) if idx == pos => "True".to_string(),
            (Some(_), Some(_)) => "False".to_string(),
            _ => label.0.clone(),
        }
    }

    /// Maps a model-produced label string back onto the set. Accepts the label
    /// value, its canonical token, or (binary only) `true`/`false` in any case.
    pub fn resolve(&self, text: &str) -> Option<Label> {
        let text = text.trim();
        if let Some(l) = self.0.iter().find(|l| l.0 == text) {
            return Some(l.clone());
        }
        if let Some(l) = self.from_token(text) {
            return Some(l);
        }
        if let Some(pos) = self.positive_index() {
            let neg = 1 - pos;
            match text.to_ascii_lowercase().as_str() {
                "true" => return Some(self.0[pos].clone()),
                "false" => return Some(self.0[neg].clone()),
                _ => {}
            }
        }
        None
    }

    /// Labels an instantiation marked `True`, `False` or `Both` can support.
    pub fn relevance_subset(&self, relevance: &str) -> Option<Vec<Label>> {
        let r = relevance.trim().to_ascii_lowercase();
        if r == "both" || r == "all" {
            return Some(self.0.clone());
        }
        self.resolve(relevance).map(|l| vec![l])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Dialogue,
    Structured,
    #[default]
    Freeform,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputBlock {
    pub content: String,
    #[serde(default)]
    pub kind: InputKind,
}

impl InputBlock {
    pub fn new(content: impl Into<String>, kind: InputKind) -> Self {
        Self {
            content: content.into(),
            kind,
        }
    }

    pub fn is_blank(&self) -> bool {
        self.content.trim().is_empty()
    }
}

/// Criterion, label set and unlabeled seeds that parameterize a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub criterion: String,
    pub labels: LabelSet,
    pub seeds: Vec<InputBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_hint: Option<String>,
}

impl TaskSpec {
    pub fn new(criterion: impl Into<String>, labels: LabelSet, seeds: Vec<InputBlock>) -> Self {
        Self {
            criterion: criterion.into(),
            labels,
            seeds,
            domain_hint: None,
        }
    }

    /// Returns the task unchanged iff every invariant holds.
    pub fn validate(self) -> Result<Self, TaskError> {
        if self.criterion.trim().is_empty() {
            return Err(TaskError::EmptyCriterion);
        }
        let mut seen: Vec<&Label> = Vec::new();
        let mut duplicate = None;
        for l in self.labels.labels() {
            if seen.contains(&l) {
                duplicate.get_or_insert(l);
            } else {
                seen.push(l);
            }
        }
        if seen.len() < 2 {
            return Err(TaskError::DegenerateLabelSet(seen.len()));
        }
        if let Some(l) = duplicate {
            return Err(TaskError::DuplicateLabel(l.0.clone()));
        }
        if self.seeds.is_empty() {
            return Err(TaskError::EmptySeeds);
        }
        if let Some(i) = self.seeds.iter().position(InputBlock::is_blank) {
            return Err(TaskError::EmptySeed(i));
        }
        Ok(self)
    }

    /// Hex SHA-256 over the criterion, labels and seed contents.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.criterion.as_bytes());
        for l in self.labels.labels() {
            h.update([0u8]);
            h.update(l.0.as_bytes());
        }
        for s in &self.seeds {
            h.update([1u8]);
            h.update(s.content.as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Per-seed content hashes, used to check that a test-set run draws on
    /// seeds disjoint from its training run.
    pub fn seed_hashes(&self) -> Vec<String> {
        self.seeds
            .iter()
            .map(|s| hex::encode(Sha256::digest(s.content.trim().as_bytes())))
            .collect()
    }
}

/// A generated sample `(x, y, r)` with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSample {
    pub input: InputBlock,
    pub target_label: Label,
    pub reasoning: String,
    pub dimension_id: String,
    pub instantiation_id: String,
    pub refinement_round: u32,
}

/// An accepted sample together with the transcript that accepted it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub sample: CandidateSample,
    pub transcript_id: String,
    pub created_at: String,
    pub run_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeds(n: usize) -> Vec<InputBlock> {
        (0..n)
            .map(|i| InputBlock::new(format!("User: hi {i}\nAgent: hello"), InputKind::Dialogue))
            .collect()
    }

    #[test]
    fn ten_seeds_binary_is_valid() {
        let t = TaskSpec::new("Never disclose GPS coordinates.", LabelSet::binary(), seeds(10));
        assert!(t.validate().is_ok());
    }

    #[test]
    fn single_label_is_degenerate() {
        let t = TaskSpec::new("c", LabelSet::new(["0"]), seeds(1));
        assert_eq!(t.validate(), Err(TaskError::DegenerateLabelSet(1)));
        let t = TaskSpec::new("c", LabelSet::new(["0", "0"]), seeds(1));
        assert_eq!(t.validate(), Err(TaskError::DegenerateLabelSet(1)));
    }

    #[test]
    fn zero_seeds_rejected() {
        let t = TaskSpec::new("c", LabelSet::binary(), vec![]);
        assert_eq!(t.validate(), Err(TaskError::EmptySeeds));
    }

    #[test]
    fn blank_criterion_and_seed_rejected() {
        let t = TaskSpec::new("  \n", LabelSet::binary(), seeds(1));
        assert_eq!(t.validate(), Err(TaskError::EmptyCriterion));
        let mut s = seeds(2);
        s[1].content = " \t ".into();
        let t = TaskSpec::new("c", LabelSet::binary(), s);
        assert_eq!(t.validate(), Err(TaskError::EmptySeed(1)));
    }

    #[test]
    fn binary_tokens_and_verdicts() {
        let set = LabelSet::binary();
        assert_eq!(set.token(&"1".into()).as_deref(), Some("1"));
        assert_eq!(set.verdict_word(&"1".into()), "True");
        assert_eq!(set.verdict_word(&"0".into()), "False");
        assert_eq!(set.resolve("TRUE"), Some("1".into()));
        assert_eq!(set.resolve(" false "), Some("0".into()));

        let reversed = LabelSet::new(["1", "0"]);
        assert_eq!(reversed.token(&"0".into()).as_deref(), Some("0"));
        assert_eq!(reversed.verdict_word(&"1".into()), "True");

        let named = LabelSet::new(["compliant", "violation"]);
        assert_eq!(named.token(&"violation".into()).as_deref(), Some("1"));
        assert_eq!(named.from_token("0"), Some("compliant".into()));
        assert_eq!(named.resolve("True"), Some("violation".into()));
    }

    #[test]
    fn multiclass_tokens() {
        let set = LabelSet::new(["0", "1", "2"]);
        assert_eq!(set.token(&"2".into()).as_deref(), Some("2"));
        assert_eq!(set.verdict_word(&"2".into()), "2");
        let named = LabelSet::new(["low", "mid", "high"]);
        assert_eq!(named.token(&"high".into()).as_deref(), Some("2"));
        let many = LabelSet::new((0..11).map(|i| format!("class-{i}")));
        assert_eq!(many.token(&"class-3".into()), None);
        assert!(many.token_map().is_none());
    }

    #[test]
    fn relevance_subsets() {
        let set = LabelSet::binary();
        assert_eq!(set.relevance_subset("Both").unwrap().len(), 2);
        assert_eq!(set.relevance_subset("True"), Some(vec!["1".into()]));
        assert_eq!(set.relevance_subset("nonsense"), None);
    }

    #[test]
    fn fingerprint_depends_on_seeds() {
        let a = TaskSpec::new("c", LabelSet::binary(), seeds(2));
        let b = TaskSpec::new("c", LabelSet::binary(), seeds(3));
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}

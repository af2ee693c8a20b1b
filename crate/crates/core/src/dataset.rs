//! On-disk artifacts: dataset, rejects and debate-log JSONL, the run
//! manifest, seed files, and the classification-prompt export.
//!
//! Every writer goes through a temp file in the target directory and a
//! rename, so a crash never leaves a truncated artifact. The same input
//! always produces the same bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{render, PlaceholderMap, RenderedPrompt, TemplateId};
use crate::pipeline::{RunManifest, RunOutput};
use crate::task::{CandidateSample, DatasetRecord, InputBlock, InputKind, Label, LabelSet, TaskSpec};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const REJECTS_FILE: &str = "rejects.jsonl";
pub const DEBATE_LOG_FILE: &str = "debate_log.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: label token {token:?} is not in the label set")]
    UnknownLabel { line: usize, token: String },
    #[error("label {0} has no single-character token")]
    UnrenderableLabel(Label),
    #[error("{0}: no seeds found")]
    EmptySeedFile(PathBuf),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One dataset line. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetLine {
    pub input_block: String,
    pub kind: InputKind,
    pub label: String,
    pub reasoning: String,
    pub dimension_id: String,
    pub instantiation_id: String,
    pub refinement_round: u32,
    pub transcript_id: String,
    pub run_id: String,
    pub created_at: String,
}

impl DatasetLine {
    pub fn from_record(record: &DatasetRecord, labels: &LabelSet) -> Result<Self, DatasetError> {
        let s = &record.sample;
        let label = labels
            .token(&s.target_label)
            .ok_or_else(|| DatasetError::UnrenderableLabel(s.target_label.clone()))?;
        Ok(Self {
            input_block: s.input.content.clone(),
            kind: s.input.kind,
            label,
            reasoning: s.reasoning.clone(),
            dimension_id: s.dimension_id.clone(),
            instantiation_id: s.instantiation_id.clone(),
            refinement_round: s.refinement_round,
            transcript_id: record.transcript_id.clone(),
            run_id: record.run_id.clone(),
            created_at: record.created_at.clone(),
        })
    }

    pub fn into_record(self, labels: &LabelSet, line: usize) -> Result<DatasetRecord, DatasetError> {
        let target_label = labels.from_token(&self.label).ok_or(DatasetError::UnknownLabel {
            line,
            token: self.label,
        })?;
        Ok(DatasetRecord {
            sample: CandidateSample {
                input: InputBlock::new(self.input_block, self.kind),
                target_label,
                reasoning: self.reasoning,
                dimension_id: self.dimension_id,
                instantiation_id: self.instantiation_id,
                refinement_round: self.refinement_round,
            },
            transcript_id: self.transcript_id,
            created_at: self.created_at,
            run_id: self.run_id,
        })
    }
}

/// Writes `contents` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// One compact JSON object per line, each followed by `\n`.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("artifact types serialize"));
        out.push('\n');
    }
    out
}

/// Parses JSONL, skipping blank lines. Line numbers are 1-based.
pub fn from_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<(usize, T)>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| DatasetError::Json {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<usize, DatasetError> {
    write_atomic(path, to_jsonl(items).as_bytes())?;
    Ok(items.len())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(from_jsonl(&text)?.into_iter().map(|(_, v)| v).collect())
}

pub fn encode_dataset(records: &[DatasetRecord], labels: &LabelSet) -> Result<String, DatasetError> {
    let lines = records
        .iter()
        .map(|r| DatasetLine::from_record(r, labels))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(to_jsonl(&lines))
}

pub fn decode_dataset(text: &str, labels: &LabelSet) -> Result<Vec<DatasetRecord>, DatasetError> {
    from_jsonl::<DatasetLine>(text)?
        .into_iter()
        .map(|(n, l)| l.into_record(labels, n))
        .collect()
}

/// Returns the number of records written.
pub fn write_dataset(records: &[DatasetRecord], labels: &LabelSet, path: &Path) -> Result<usize, DatasetError> {
    write_atomic(path, encode_dataset(records, labels)?.as_bytes())?;
    Ok(records.len())
}

pub fn read_dataset(path: &Path, labels: &LabelSet) -> Result<Vec<DatasetRecord>, DatasetError> {
    decode_dataset(&fs::read_to_string(path).map_err(io_err(path))?, labels)
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json {
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes the four run artifacts into `dir`.
pub fn write_run(output: &RunOutput, labels: &LabelSet, dir: &Path) -> Result<(), DatasetError> {
    write_dataset(&output.dataset, labels, &dir.join(DATASET_FILE))?;
    write_jsonl(&output.rejects, &dir.join(REJECTS_FILE))?;
    write_jsonl(&output.transcripts, &dir.join(DEBATE_LOG_FILE))?;
    write_manifest(&output.manifest, &dir.join(MANIFEST_FILE))
}

/// A classification prompt and its single-character answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationExample {
    pub system: String,
    pub user: String,
    pub completion: String,
}

/// The classification prompt for one input, shared by training export and
/// evaluation.
pub fn classification_prompt(criterion: &str, input_block: &str) -> RenderedPrompt {
    let mut p = PlaceholderMap::new();
    p.insert("rule".into(), criterion.into());
    p.insert("input_block".into(), input_block.into());
    render(TemplateId::Classification, &p).expect("classification placeholders are complete")
}

pub fn to_classification_example(
    record: &DatasetRecord,
    task: &TaskSpec,
) -> Result<ClassificationExample, DatasetError> {
    let label = &record.sample.target_label;
    let completion = task
        .labels
        .token(label)
        .filter(|t| t.chars().count() == 1)
        .ok_or_else(|| DatasetError::UnrenderableLabel(label.clone()))?;
    let prompt = classification_prompt(&task.criterion, &record.sample.input.content);
    Ok(ClassificationExample {
        system: prompt.system,
        user: prompt.user,
        completion,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: String,
    pub content: String,
}

/// One line of the chat-format export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExample {
    pub messages: Vec<ChatTurn>,
}

impl From<&ClassificationExample> for ChatExample {
    fn from(e: &ClassificationExample) -> Self {
        let turn = |role: &str, content: &str| ChatTurn {
            role: role.into(),
            content: content.into(),
        };
        Self {
            messages: vec![
                turn("system", &e.system),
                turn("user", &e.user),
                turn("assistant", &e.completion),
            ],
        }
    }
}

/// Writes the system/user/assistant export. Returns the line count.
pub fn export_chat(records: &[DatasetRecord], task: &TaskSpec, path: &Path) -> Result<usize, DatasetError> {
    let lines = records
        .iter()
        .map(|r| to_classification_example(r, task).map(|e| ChatExample::from(&e)))
        .collect::<Result<Vec<_>, _>>()?;
    write_jsonl(&lines, path)
}

#[derive(Deserialize)]
struct SeedLine {
    content: Option<String>,
    kind: Option<InputKind>,
}

/// Reads seeds from JSONL objects with a `content` field, or from plain text
/// with blocks separated by blank lines. Blocks are trimmed.
pub fn parse_seeds(text: &str, kind: InputKind, path: &Path) -> Result<Vec<InputBlock>, DatasetError> {
    let jsonl = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with('{'));
    let mut blocks = Vec::new();
    if jsonl {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| DatasetError::MalformedLine { line: i + 1, message };
            let seed: SeedLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            let content = seed
                .content
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .ok_or_else(|| malformed("missing or empty \"content\" field".into()))?;
            blocks.push(InputBlock::new(content, seed.kind.unwrap_or(kind)));
        }
    } else {
        let mut current: Vec<&str> = Vec::new();
        for line in text.lines().chain(std::iter::once("")) {
            if line.trim().is_empty() {
                if !current.is_empty() {
                    blocks.push(InputBlock::new(current.join("\n").trim(), kind));
                    current.clear();
                }
            } else {
                current.push(line);
            }
        }
    }
    if blocks.is_empty() {
        return Err(DatasetError::EmptySeedFile(path.to_path_buf()));
    }
    Ok(blocks)
}

pub fn ingest_seeds(path: &Path, kind: InputKind) -> Result<Vec<InputBlock>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_seeds(&text, kind, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(i: usize, input: &str, label: &str) -> DatasetRecord {
        DatasetRecord {
            sample: CandidateSample {
                input: InputBlock::new(input, InputKind::Freeform),
                target_label: Label::from(label),
                reasoning: format!("reason {i}"),
                dimension_id: "run-d0".into(),
                instantiation_id: "run-d0-v1".into(),
                refinement_round: (i % 4) as u32,
            },
            transcript_id: format!("run-e{i}-a0-r0"),
            created_at: "1970-01-01T00:00:00Z".into(),
            run_id: "run".into(),
        }
    }

    #[test]
    fn empty_dataset_is_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        assert_eq!(write_dataset(&[], &LabelSet::binary(), &p).unwrap(), 0);
        assert_eq!(fs::read(&p).unwrap(), b"");
    }

    #[test]
    fn embedded_newlines_stay_on_one_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let recs = vec![
            record(0, "Q: a\nA: b", "0"),
            record(1, "line\n\nbreak", "1"),
            record(2, "plain", "1"),
        ];
        let labels = LabelSet::binary();
        assert_eq!(write_dataset(&recs, &labels, &p).unwrap(), 3);
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l == l.trim_end()));
        assert_eq!(read_dataset(&p, &labels).unwrap(), recs);
        assert!(text.starts_with("{\"input_block\":\"Q: a\\nA: b\",\"kind\":\"freeform\",\"label\":\"0\","));
    }

    #[test]
    fn writes_are_byte_identical() {
        let recs = vec![record(0, "x", "1"), record(1, "y", "0")];
        let labels = LabelSet::binary();
        assert_eq!(
            encode_dataset(&recs, &labels).unwrap(),
            encode_dataset(&recs, &labels).unwrap()
        );
    }

    #[test]
    fn unknown_token_reports_line() {
        let text = "\n{\"input_block\":\"x\",\"kind\":\"freeform\",\"label\":\"7\",\"reasoning\":\"r\",\"dimension_id\":\"d\",\"instantiation_id\":\"v\",\"refinement_round\":0,\"transcript_id\":\"t\",\"run_id\":\"r\",\"created_at\":\"c\"}\n";
        let err = decode_dataset(text, &LabelSet::binary()).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownLabel { line: 2, .. }), "{err}");
    }

    fn task(labels: LabelSet) -> TaskSpec {
        TaskSpec::new(
            "The answer contains health advice.",
            labels,
            vec![InputBlock::new("Q: hi", InputKind::Freeform)],
        )
    }

    #[test]
    fn classification_example_for_negative_health_sample() {
        let r = record(
            0,
            "Q: What are the types of conjunctivitis?\nA: Bacterial, viral and neonatal.",
            "0",
        );
        let e = to_classification_example(&r, &task(LabelSet::binary())).unwrap();
        assert_eq!(e.completion, "0");
        assert!(e
            .system
            .contains("determine whether the following condition applies: The answer contains health advice."));
        assert!(e.system.contains("Output only a single character (1 or 0)"));
        assert_eq!(
            e.user,
            "<INPUT>\nQ: What are the types of conjunctivitis?\nA: Bacterial, viral and neonatal.\n</INPUT>"
        );
    }

    #[test]
    fn three_labels_map_to_their_tokens() {
        let t = task(LabelSet::new(["0", "1", "2"]));
        let e = to_classification_example(&record(0, "x", "2"), &t).unwrap();
        assert_eq!(e.completion, "2");
        let wide = task(LabelSet::new((0..11).map(|i| format!("class-{i}"))));
        let err = to_classification_example(&record(0, "x", "class-10"), &wide).unwrap_err();
        assert!(matches!(err, DatasetError::UnrenderableLabel(_)));
    }

    #[test]
    fn chat_export_has_three_turns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("chat.jsonl");
        let t = task(LabelSet::binary());
        assert_eq!(export_chat(&[record(0, "x", "1")], &t, &p).unwrap(), 1);
        let lines: Vec<ChatExample> = read_jsonl(&p).unwrap();
        let roles: Vec<_> = lines[0].messages.iter().map(|m| m.role.as_str()).collect();
        assert_eq!(roles, ["system", "user", "assistant"]);
        assert_eq!(lines[0].messages[2].content, "1");
    }

    #[test]
    fn seeds_from_jsonl_and_text() {
        let p = Path::new("seeds");
        let jsonl: String = (0..10).map(|i| format!("{{\"content\": \" seed {i} \"}}\n")).collect();
        let seeds = parse_seeds(&jsonl, InputKind::Dialogue, p).unwrap();
        assert_eq!(seeds.len(), 10);
        assert_eq!(seeds[3].content, "seed 3");

        let text = "User: a\nAgent: b\n\n\nUser: c\nAgent: d\n";
        let seeds = parse_seeds(text, InputKind::Dialogue, p).unwrap();
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds[1].content, "User: c\nAgent: d");

        let err = parse_seeds("{\"content\": \"a\"}\n{\"text\": \"b\"}\n", InputKind::Freeform, p).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedLine { line: 2, .. }));
        assert!(matches!(
            parse_seeds("  \n\n", InputKind::Freeform, p),
            Err(DatasetError::EmptySeedFile(_))
        ));
    }

    #[test]
    fn missing_seed_file_is_io_error() {
        assert!(matches!(
            ingest_seeds(Path::new("/nonexistent/seeds.txt"), InputKind::Freeform),
            Err(DatasetError::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn dataset_round_trip(items in prop::collection::vec(("\\PC*\n?\\PC*", any::<bool>(), 0u32..4), 0..8)) {
            let labels = LabelSet::binary();
            let recs: Vec<_> = items
                .iter()
                .enumerate()
                .map(|(i, (text, pos, round))| {
                    let mut r = record(i, text, if *pos { "1" } else { "0" });
                    r.sample.refinement_round = *round;
                    r
                })
                .collect();
            let text = encode_dataset(&recs, &labels).unwrap();
            prop_assert_eq!(text.lines().count(), recs.len());
            prop_assert_eq!(decode_dataset(&text, &labels).unwrap(), recs);
        }
    }
}

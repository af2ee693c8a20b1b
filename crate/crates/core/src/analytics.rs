//! Measurements over run artifacts: debate-path distributions, coverage of
//! a sample set by instantiations, label balance, refinement statistics and
//! classifier accuracy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{classify_path, DebatePath, DebateTranscript};
use crate::dimension::Instantiation;
use crate::gateway::{CompletionRequest, Gateway, GatewayError, Parsed, ResponseSchema, TemplateId};
use crate::task::{DatasetRecord, InputBlock, Label, LabelSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("malformed transcript on line {line}: {message}")]
    MalformedTranscript { line: usize, message: String },
    #[error("threshold {0} must lie strictly between 0 and 1")]
    InvalidThreshold(f64),
    #[error("subset size {size} exceeds the {available} instantiations given")]
    SubsetTooLarge { size: usize, available: usize },
    #[error("{predictions} predictions for {gold} gold items")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("item {index}: prediction id {prediction:?} does not match gold id {gold:?}")]
    MisalignedIds {
        index: usize,
        prediction: String,
        gold: String,
    },
    #[error("accuracy of an empty set is undefined")]
    Empty,
    #[error(transparent)]
    Oracle(#[from] GatewayError),
}

/// Path counts for one target label, with every path present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCounts(pub BTreeMap<DebatePath, u64>);

impl Default for PathCounts {
    fn default() -> Self {
        Self(DebatePath::ALL.iter().map(|p| (*p, 0)).collect())
    }
}

impl PathCounts {
    pub fn get(&self, path: DebatePath) -> u64 {
        self.0.get(&path).copied().unwrap_or(0)
    }

    pub fn sum(&self) -> u64 {
        self.0.values().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathHistogram {
    pub by_target: BTreeMap<Label, PathCounts>,
    pub total: u64,
}

impl PathHistogram {
    pub fn count(&self, path: DebatePath) -> u64 {
        self.by_target.values().map(|c| c.get(path)).sum()
    }

    pub fn is_partition(&self) -> bool {
        self.by_target.values().map(PathCounts::sum).sum::<u64>() == self.total
    }

    /// Share of debates that did not end in immediate consensus on the target.
    pub fn nontrivial_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        1.0 - self.count(DebatePath::ImmediateConsensusTarget) as f64 / self.total as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("target_label,path,count\n");
        for (label, counts) in &self.by_target {
            for (path, n) in &counts.0 {
                let _ = writeln!(out, "{},{},{n}", label, path.as_str());
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let labels: Vec<&Label> = self.by_target.keys().collect();
        let mut out = format!("{:<28}", "path");
        for l in &labels {
            let _ = write!(out, "{:>10}", format!("y={l}"));
        }
        let _ = writeln!(out, "{:>10}", "all");
        for path in DebatePath::ALL {
            let _ = write!(out, "{:<28}", path.as_str());
            for l in &labels {
                let _ = write!(out, "{:>10}", self.by_target[*l].get(path));
            }
            let _ = writeln!(out, "{:>10}", self.count(path));
        }
        let _ = writeln!(out, "{:<28}{:>10}", "total", self.total);
        let _ = writeln!(out, "nontrivial fraction: {:.4}", self.nontrivial_fraction());
        out
    }
}

/// Classifies every transcript from its recorded verdicts.
pub fn path_histogram(transcripts: &[DebateTranscript]) -> PathHistogram {
    let mut h = PathHistogram::default();
    for t in transcripts {
        *h.by_target
            .entry(t.target_label.clone())
            .or_default()
            .0
            .entry(classify_path(t))
            .or_default() += 1;
        h.total += 1;
    }
    h
}

/// Parses a debate log (one transcript per line) and classifies it.
pub fn path_histogram_from_log(text: &str) -> Result<PathHistogram, AnalyticsError> {
    let mut transcripts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: DebateTranscript = serde_json::from_str(line).map_err(|e| AnalyticsError::MalformedTranscript {
            line: i + 1,
            message: e.to_string(),
        })?;
        if t.rounds.is_empty() || t.rounds.iter().any(|r| r.len() != t.judge_count) {
            return Err(AnalyticsError::MalformedTranscript {
                line: i + 1,
                message: "rounds do not match the judge count".into(),
            });
        }
        transcripts.push(t);
    }
    Ok(path_histogram(&transcripts))
}

/// Relevance in [0, 1] of a sample to an instantiation.
pub trait RelevanceOracle {
    fn relevance(&self, sample: &InputBlock, instantiation: &Instantiation) -> Result<f64, GatewayError>;
}

impl<F> RelevanceOracle for F
where
    F: Fn(&InputBlock, &Instantiation) -> f64,
{
    fn relevance(&self, sample: &InputBlock, instantiation: &Instantiation) -> Result<f64, GatewayError> {
        Ok(self(sample, instantiation))
    }
}

/// Relevance rated by the model through the `coverage_rating` template.
pub struct GatewayRelevance<'a> {
    pub gateway: &'a Gateway,
    pub criterion: &'a str,
}

impl RelevanceOracle for GatewayRelevance<'_> {
    fn relevance(&self, sample: &InputBlock, instantiation: &Instantiation) -> Result<f64, GatewayError> {
        let req = CompletionRequest::new(TemplateId::CoverageRating, ResponseSchema::RelevanceScore)
            .with("evaluation_criterion", self.criterion)
            .with("instantiation", &instantiation.text)
            .with("input_block", &sample.content);
        match self.gateway.complete(&req)?.value {
            Parsed::Score(s) => Ok(s),
            other => unreachable!("relevance schema parsed as {other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub instantiation_count: usize,
    pub covered_fraction: f64,
    pub threshold: f64,
    /// Best relevance per sample; `None` with no instantiations.
    pub best_scores: Vec<Option<f64>>,
}

fn check_threshold(threshold: f64) -> Result<(), AnalyticsError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidThreshold(threshold))
    }
}

fn report_from(scores: &[Vec<f64>], count: usize, threshold: f64) -> CoverageReport {
    let best_scores: Vec<Option<f64>> = scores
        .iter()
        .map(|row| row[..count].iter().copied().reduce(f64::max))
        .collect();
    let covered = best_scores.iter().filter(|b| b.is_some_and(|s| s > threshold)).count();
    CoverageReport {
        instantiation_count: count,
        covered_fraction: if best_scores.is_empty() {
            0.0
        } else {
            covered as f64 / best_scores.len() as f64
        },
        threshold,
        best_scores,
    }
}

fn score_matrix(
    samples: &[InputBlock],
    instantiations: &[Instantiation],
    oracle: &dyn RelevanceOracle,
) -> Result<Vec<Vec<f64>>, GatewayError> {
    samples
        .iter()
        .map(|s| instantiations.iter().map(|v| oracle.relevance(s, v)).collect())
        .collect()
}

/// A sample is covered when its relevance to some instantiation strictly
/// exceeds `threshold`. Calls the oracle once per (sample, instantiation).
pub fn coverage(
    samples: &[InputBlock],
    instantiations: &[Instantiation],
    oracle: &dyn RelevanceOracle,
    threshold: f64,
) -> Result<CoverageReport, AnalyticsError> {
    check_threshold(threshold)?;
    let scores = score_matrix(samples, instantiations, oracle)?;
    Ok(report_from(&scores, instantiations.len(), threshold))
}

/// Coverage for each prefix of `instantiations` of the given sizes. Prefixes
/// are nested, and each score is computed once.
pub fn coverage_curve(
    samples: &[InputBlock],
    instantiations: &[Instantiation],
    sizes: &[usize],
    oracle: &dyn RelevanceOracle,
    threshold: f64,
) -> Result<Vec<CoverageReport>, AnalyticsError> {
    check_threshold(threshold)?;
    let max = sizes.iter().copied().max().unwrap_or(0);
    if max > instantiations.len() {
        return Err(AnalyticsError::SubsetTooLarge {
            size: max,
            available: instantiations.len(),
        });
    }
    let scores = score_matrix(samples, &instantiations[..max], oracle)?;
    Ok(sizes.iter().map(|&n| report_from(&scores, n, threshold)).collect())
}

pub fn coverage_csv(curve: &[CoverageReport]) -> String {
    let mut out = String::from("instantiation_count,covered_fraction\n");
    for r in curve {
        let _ = writeln!(out, "{},{}", r.instantiation_count, r.covered_fraction);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelShare {
    pub label: Label,
    pub count: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBalance {
    pub total: u64,
    /// In label-set order; labels with no records are listed with 0.
    pub shares: Vec<LabelShare>,
}

impl LabelBalance {
    pub fn count(&self, label: &Label) -> u64 {
        self.shares.iter().find(|s| &s.label == label).map_or(0, |s| s.count)
    }
}

pub fn label_balance(records: &[DatasetRecord], labels: &LabelSet) -> LabelBalance {
    let mut counts: BTreeMap<&Label, u64> = BTreeMap::new();
    for r in records {
        *counts.entry(&r.sample.target_label).or_default() += 1;
    }
    let total = records.len() as u64;
    let mut shares: Vec<LabelShare> = labels
        .labels()
        .iter()
        .map(|l| {
            let count = counts.remove(l).unwrap_or(0);
            LabelShare {
                label: l.clone(),
                count,
                fraction: if total == 0 { 0.0 } else { count as f64 / total as f64 },
            }
        })
        .collect();
    for (l, count) in counts {
        shares.push(LabelShare {
            label: l.clone(),
            count,
            fraction: count as f64 / total as f64,
        });
    }
    LabelBalance { total, shares }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStats {
    pub accepted: u64,
    /// Accepted samples per refinement round.
    pub by_round: BTreeMap<u32, u64>,
    pub mean_round: f64,
    pub first_try_fraction: f64,
}

pub fn refinement_stats(records: &[DatasetRecord]) -> RefinementStats {
    let mut by_round = BTreeMap::new();
    for r in records {
        *by_round.entry(r.sample.refinement_round).or_default() += 1;
    }
    let n = records.len() as f64;
    let sum: u64 = records.iter().map(|r| r.sample.refinement_round as u64).sum();
    RefinementStats {
        accepted: records.len() as u64,
        mean_round: if records.is_empty() { 0.0 } else { sum as f64 / n },
        first_try_fraction: if records.is_empty() {
            0.0
        } else {
            by_round.get(&0).copied().unwrap_or(0) as f64 / n
        },
        by_round,
    }
}

/// One classifier output; `None` when the output could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub id: String,
    pub label: Label,
}

/// Exact-match fraction. Missing predictions count as incorrect.
pub fn accuracy(predictions: &[Prediction], gold: &[GoldItem]) -> Result<f64, AnalyticsError> {
    if predictions.len() != gold.len() {
        return Err(AnalyticsError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut correct = 0usize;
    for (i, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.id != g.id {
            return Err(AnalyticsError::MisalignedIds {
                index: i,
                prediction: p.id.clone(),
                gold: g.id.clone(),
            });
        }
        correct += (p.label.as_ref() == Some(&g.label)) as usize;
    }
    Ok(correct as f64 / gold.len() as f64)
}

/// Combined report for a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<PathHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_balance: Option<LabelBalance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coverage: Vec<CoverageReport>,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.paths {
            out.push_str("debate paths\n");
            out.push_str(&p.to_table());
        }
        if let Some(b) = &self.label_balance {
            let _ = writeln!(out, "\nlabel balance ({} records)", b.total);
            for s in &b.shares {
                let _ = writeln!(out, "{:<12}{:>8}{:>10.4}", s.label.as_str(), s.count, s.fraction);
            }
        }
        if let Some(r) = &self.refinement {
            let _ = writeln!(out, "\nrefinement rounds of accepted samples");
            for (round, n) in &r.by_round {
                let _ = writeln!(out, "{round:<12}{n:>8}");
            }
            let _ = writeln!(
                out,
                "mean {:.4}, accepted without refinement {:.4}",
                r.mean_round, r.first_try_fraction
            );
        }
        if !self.coverage.is_empty() {
            let _ = writeln!(out, "\ncoverage");
            for c in &self.coverage {
                let _ = writeln!(
                    out,
                    "{:<12}{:>10.4}  (threshold {})",
                    c.instantiation_count, c.covered_fraction, c.threshold
                );
            }
        }
        out
    }
}

//! End-to-end sample generation.
//!
//! Decompose once, then run episodes until `target_size` samples are
//! accepted. An episode draws a (dimension, instantiation, label) triple,
//! generates a sample, debates it, and refines it on rejection up to `r_max`
//! times. An episode whose last debate still rejects is discarded.
//!
//! Each episode draws from its own RNG stream keyed by `(rng_seed, index)`,
//! and results are committed in episode-index order, so the dataset does not
//! depend on `parallel_episodes` or on scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::debate::{run_debate, valid, DebateConfig, DebateError, DebateOutcome, DebateTranscript};
use crate::dimension::{
    decompose_and_instantiate, DecomposeConfig, Decomposition, Dimension, DimensionError, Instantiation,
};
use crate::gateway::{Gateway, GatewayError, TemplateId};
use crate::generator::{aggregate_dissent, generate, refine, GenerationConfig, GenerationError};
use crate::task::{CandidateSample, DatasetRecord, Label, LabelSet, TaskError, TaskSpec};

/// Timestamp used when a run pins `created_at` for byte-reproducible output.
pub const EPOCH: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    InvalidTask(#[from] TaskError),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("decomposition failed: {0}")]
    DecompositionFailed(#[from] DimensionError),
    #[error("{count} seeds overlap the excluded training seeds")]
    SeedOverlap { count: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("completion budget of {cap} calls exhausted after {} accepted samples", partial.dataset.len())]
    BudgetExceeded { cap: u64, partial: Box<RunOutput> },
}

impl PipelineError {
    /// Whether the failure came from the completion cap, at any stage.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            PipelineError::BudgetExceeded { .. }
                | PipelineError::Gateway(GatewayError::BudgetExceeded { .. })
                | PipelineError::DecompositionFailed(DimensionError::Gateway(GatewayError::BudgetExceeded { .. }))
        )
    }
}

/// Generation of a held-out set: fresh decomposition over seeds disjoint from
/// a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestSetMode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disjoint_from_run: Option<String>,
    /// Seed hashes of the training run.
    #[serde(default)]
    pub exclude_seed_hashes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub target_size: usize,
    pub debate: DebateConfig,
    pub generation: GenerationConfig,
    pub decomposition: DecomposeConfig,
    pub rng_seed: u64,
    pub parallel_episodes: usize,
    #[serde(default)]
    pub weighted_instantiation_sampling: bool,
    #[serde(default)]
    pub label_compatibility_filter: bool,
    /// Drop accepted samples whose input block exactly repeats an earlier one.
    #[serde(default)]
    pub dedup_samples: bool,
    /// Full re-runs of an episode after a parse or transport failure.
    #[serde(default = "one")]
    pub episode_retries: u32,
    /// Fixed `created_at` for every record; wall-clock time when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_set: Option<TestSetMode>,
}

fn one() -> u32 {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            target_size: 1000,
            debate: DebateConfig::default(),
            generation: GenerationConfig::default(),
            decomposition: DecomposeConfig::default(),
            rng_seed: 0,
            parallel_episodes: 4,
            weighted_instantiation_sampling: false,
            label_compatibility_filter: false,
            dedup_samples: false,
            episode_retries: 1,
            created_at: None,
            test_set: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.target_size == 0 {
            return Err(PipelineError::InvalidConfig("target size must be at least 1".into()));
        }
        if self.parallel_episodes == 0 {
            return Err(PipelineError::InvalidConfig(
                "parallel_episodes must be at least 1".into(),
            ));
        }
        self.debate
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingFlags {
    pub weighted: bool,
    pub label_compatibility_filter: bool,
}

/// Draws the dimension, then the label, then the instantiation.
///
/// By default the three draws are independent and uniform. With the filter on,
/// the instantiation is drawn from those supporting the label, or from the
/// whole dimension when none does.
pub fn sample_configuration<'a, R: Rng + ?Sized>(
    rng: &mut R,
    decomposition: &'a Decomposition,
    labels: &LabelSet,
    flags: SamplingFlags,
) -> (&'a Dimension, &'a Instantiation, Label) {
    let dimension = &decomposition.dimensions[rng.random_range(0..decomposition.dimensions.len())];
    let label = labels.labels()[rng.random_range(0..labels.len())].clone();
    let all = decomposition.instantiations_for(&dimension.id);
    let mut pool = all.clone();
    if flags.label_compatibility_filter {
        pool.retain(|v| v.supports(&label));
        if pool.is_empty() {
            pool = all;
        }
    }
    let pick = if flags.weighted {
        WeightedIndex::new(pool.iter().map(|v| v.weight))
            .map(|w| w.sample(rng))
            .unwrap_or_else(|_| rng.random_range(0..pool.len()))
    } else {
        rng.random_range(0..pool.len())
    };
    (dimension, pool[pick], label)
}

/// RNG for one episode.
pub fn episode_rng(rng_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    /// The last debate rejected the sample.
    Debate { outcome: DebateOutcome },
    /// Parse or transport failures exhausted the episode retries.
    Failure { message: String },
    /// An accepted sample repeated an earlier input block.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub episode: u64,
    pub dimension_id: String,
    pub instantiation_id: String,
    pub target_label: Label,
    pub reason: RejectReason,
    /// Generate plus refine calls in the final attempt.
    pub generator_calls: u32,
    pub debates: u32,
    pub attempts: u32,
    pub transcript_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_sample: Option<CandidateSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeResult {
    Accepted(DatasetRecord),
    Rejected(RejectRecord),
    /// Stopped by the completion cap.
    Aborted,
    /// An error the run cannot continue past.
    Fatal(GatewayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub index: u64,
    pub result: EpisodeResult,
    pub transcripts: Vec<DebateTranscript>,
    pub generator_calls: u32,
    pub refinements: u32,
    /// Provider calls made by this episode, retries included.
    pub completions: BTreeMap<TemplateId, u64>,
}

/// Everything an episode reads. Shared by all workers.
pub struct RunContext<'a> {
    pub gateway: &'a Gateway,
    pub task: &'a TaskSpec,
    pub decomposition: &'a Decomposition,
    pub config: &'a RunConfig,
    pub run_id: &'a str,
    pub created_at: &'a str,
}

enum AttemptEnd {
    Accepted(CandidateSample, String),
    Rejected(CandidateSample, DebateOutcome),
}

struct Attempt {
    transcripts: Vec<DebateTranscript>,
    generator_calls: u32,
}

enum Failure {
    Retryable(String),
    Budget,
    Fatal(GatewayError),
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::BudgetExceeded { .. } => Failure::Budget,
            GatewayError::Provider(_) | GatewayError::Parse { .. } => Failure::Retryable(e.to_string()),
            other => Failure::Fatal(other),
        }
    }
}

impl From<GenerationError> for Failure {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Gateway(g) => g.into(),
            other => Failure::Retryable(other.to_string()),
        }
    }
}

impl From<DebateError> for Failure {
    fn from(e: DebateError) -> Self {
        match e {
            DebateError::Gateway(g) => g.into(),
            other => Failure::Retryable(other.to_string()),
        }
    }
}

impl RunContext<'_> {
    #[allow(clippy::too_many_arguments)]
    fn attempt(
        &self,
        gw: &Gateway,
        index: u64,
        attempt: u32,
        dimension: &Dimension,
        instantiation: &Instantiation,
        label: &Label,
        seed: usize,
        log: &mut Attempt,
    ) -> Result<AttemptEnd, Failure> {
        let example = &self.task.seeds[seed];
        let r_max = self.config.generation.r_max;
        let mut sample = generate(gw, dimension, instantiation, label, self.task, example)?;
        log.generator_calls += 1;
        loop {
            let id = format!("{}-e{index}-a{attempt}-r{}", self.run_id, sample.refinement_round);
            let transcript = run_debate(gw, &sample, self.task, &self.config.debate, id.clone())?;
            let accepted = valid(&transcript);
            let outcome = transcript.outcome.clone();
            log.transcripts.push(transcript);
            if accepted {
                return Ok(AttemptEnd::Accepted(sample, id));
            }
            if sample.refinement_round >= r_max {
                return Ok(AttemptEnd::Rejected(sample, outcome));
            }
            let feedback = aggregate_dissent(log.transcripts.last().expect("just pushed"))?;
            sample = refine(
                gw,
                &sample,
                &feedback,
                dimension,
                instantiation,
                self.task,
                example,
                &self.config.generation,
            )?;
            log.generator_calls += 1;
        }
    }

    /// Runs one episode. The result depends only on `index` and the shared
    /// read-only context.
    pub fn run_episode(&self, index: u64) -> EpisodeReport {
        let mut rng = episode_rng(self.config.rng_seed, index);
        let flags = SamplingFlags {
            weighted: self.config.weighted_instantiation_sampling,
            label_compatibility_filter: self.config.label_compatibility_filter,
        };
        let (dimension, instantiation, label) =
            sample_configuration(&mut rng, self.decomposition, &self.task.labels, flags);
        let seed = rng.random_range(0..self.task.seeds.len());
        let (gw, tally) = self.gateway.tracked();

        let mut transcripts = Vec::new();
        let attempts = self.config.episode_retries + 1;
        for attempt in 0..attempts {
            let mut log = Attempt {
                transcripts: Vec::new(),
                generator_calls: 0,
            };
            let end = self.attempt(&gw, index, attempt, dimension, instantiation, &label, seed, &mut log);
            let generator_calls = log.generator_calls;
            let refinements = generator_calls.saturating_sub(1);
            let ids: Vec<String> = log.transcripts.iter().map(|t| t.id.clone()).collect();
            transcripts.extend(log.transcripts);
            let result = match end {
                Ok(AttemptEnd::Accepted(sample, transcript_id)) => EpisodeResult::Accepted(DatasetRecord {
                    sample,
                    transcript_id,
                    created_at: self.created_at.to_string(),
                    run_id: self.run_id.to_string(),
                }),
                Ok(AttemptEnd::Rejected(sample, outcome)) => EpisodeResult::Rejected(RejectRecord {
                    episode: index,
                    dimension_id: dimension.id.clone(),
                    instantiation_id: instantiation.id.clone(),
                    target_label: label.clone(),
                    reason: RejectReason::Debate { outcome },
                    generator_calls,
                    debates: ids.len() as u32,
                    attempts: attempt + 1,
                    transcript_ids: ids,
                    last_sample: Some(sample),
                }),
                Err(Failure::Budget) => EpisodeResult::Aborted,
                Err(Failure::Fatal(e)) => EpisodeResult::Fatal(e),
                Err(Failure::Retryable(message)) => {
                    if attempt + 1 < attempts {
                        continue;
                    }
                    EpisodeResult::Rejected(RejectRecord {
                        episode: index,
                        dimension_id: dimension.id.clone(),
                        instantiation_id: instantiation.id.clone(),
                        target_label: label.clone(),
                        reason: RejectReason::Failure { message },
                        generator_calls,
                        debates: ids.len() as u32,
                        attempts,
                        transcript_ids: ids,
                        last_sample: None,
                    })
                }
            };
            return EpisodeReport {
                index,
                result,
                transcripts,
                generator_calls,
                refinements,
                completions: tally.counts(),
            };
        }
        unreachable!("the final attempt always returns")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub accepted: u64,
    pub rejected_discarded: u64,
    pub episodes_started: u64,
    pub refinements_total: u64,
    /// Provider calls of the decomposition and of committed episodes. Calls
    /// made by episodes started past the target are not counted.
    pub completions_total: u64,
    pub in_flight_at_abort: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Incomplete { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelToken {
    pub label: Label,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub criterion: String,
    pub labels: Vec<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_hint: Option<String>,
    pub seed_hashes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    /// "train" or "test".
    pub split: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disjoint_from_run: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub task_fingerprint: String,
    pub task: TaskSummary,
    pub label_tokens: Option<Vec<LabelToken>>,
    pub decomposition: Decomposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    pub backend: String,
    pub counters: Counters,
    pub completions_by_template: BTreeMap<String, u64>,
    pub status: RunStatus,
    pub lineage: Lineage,
    pub created_at: String,
}

impl RunManifest {
    /// Manifest for a decomposition alone, before any episode.
    pub fn for_decomposition(
        run_id: &str,
        task: &TaskSpec,
        decomposition: Decomposition,
        gateway: &Gateway,
        created_at: &str,
    ) -> Self {
        Self {
            run_id: run_id.to_string(),
            task_fingerprint: task.fingerprint(),
            task: TaskSummary {
                criterion: task.criterion.clone(),
                labels: task.labels.labels().to_vec(),
                domain_hint: task.domain_hint.clone(),
                seed_hashes: task.seed_hashes(),
            },
            label_tokens: task.labels.token_map().map(|m| {
                m.into_iter()
                    .map(|(label, token)| LabelToken { label, token })
                    .collect()
            }),
            decomposition,
            config: None,
            backend: gateway.backend_name().to_string(),
            counters: Counters {
                completions_total: gateway.completions_used(),
                ..Counters::default()
            },
            completions_by_template: template_counts(gateway),
            status: RunStatus::Incomplete {
                reason: "decomposition only".into(),
            },
            lineage: Lineage {
                split: "train".into(),
                disjoint_from_run: None,
            },
            created_at: created_at.to_string(),
        }
    }

    /// `episodes_started = accepted + rejected_discarded + in_flight_at_abort`.
    pub fn counters_balance(&self) -> bool {
        let c = &self.counters;
        c.episodes_started == c.accepted + c.rejected_discarded + c.in_flight_at_abort
            && c.accepted <= c.episodes_started
    }
}

fn template_counts(gateway: &Gateway) -> BTreeMap<String, u64> {
    gateway
        .call_counts()
        .into_iter()
        .map(|(k, v)| (k.as_str().to_string(), v))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dataset: Vec<DatasetRecord>,
    pub manifest: RunManifest,
    pub transcripts: Vec<DebateTranscript>,
    pub rejects: Vec<RejectRecord>,
}

/// Emitted after decomposition and after each committed episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProgressEvent {
    Decomposed {
        dimensions: usize,
        instantiations: usize,
    },
    Episode {
        index: u64,
        status: String,
        accepted: u64,
        target: u64,
    },
    Finished {
        status: RunStatus,
        accepted: u64,
    },
}

/// Run identifier: a hash of the task, the config apart from
/// `parallel_episodes`, and any supplied decomposition.
pub fn run_id_for(task: &TaskSpec, config: &RunConfig, decomposition: Option<&Decomposition>) -> String {
    let mut h = Sha256::new();
    h.update(task.fingerprint());
    let identity = RunConfig {
        parallel_episodes: 1,
        ..config.clone()
    };
    h.update(serde_json::to_vec(&identity).expect("config serializes"));
    if let Some(d) = decomposition {
        h.update(serde_json::to_vec(d).expect("decomposition serializes"));
    }
    hex::encode(h.finalize())[..12].to_string()
}

fn now_or(fixed: &Option<String>) -> String {
    fixed
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

/// Decomposes the task, then generates `target_size` samples.
pub fn run(
    gateway: &Gateway,
    task: &TaskSpec,
    config: &RunConfig,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunOutput, PipelineError> {
    let task = task.clone().validate()?;
    config.validate()?;
    let mut lineage = Lineage {
        split: "train".into(),
        disjoint_from_run: None,
    };
    if let Some(mode) = &config.test_set {
        let excluded: BTreeSet<&String> = mode.exclude_seed_hashes.iter().collect();
        let count = task.seed_hashes().iter().filter(|h| excluded.contains(h)).count();
        if count > 0 {
            return Err(PipelineError::SeedOverlap { count });
        }
        lineage = Lineage {
            split: "test".into(),
            disjoint_from_run: mode.disjoint_from_run.clone(),
        };
    }
    let run_id = run_id_for(&task, config, None);
    let decompose_cfg = DecomposeConfig {
        rng_seed: config.rng_seed,
        ..config.decomposition.clone()
    };
    let decomposition = decompose_and_instantiate(gateway, &task, &run_id, &decompose_cfg)?;
    generate_episodes(gateway, &task, decomposition, config, run_id, lineage, progress)
}

/// Generates samples over a decomposition frozen by an earlier step.
pub fn run_with_decomposition(
    gateway: &Gateway,
    task: &TaskSpec,
    decomposition: Decomposition,
    config: &RunConfig,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunOutput, PipelineError> {
    let task = task.clone().validate()?;
    config.validate()?;
    if config.test_set.is_some() {
        return Err(PipelineError::InvalidConfig(
            "test-set mode needs a fresh decomposition".into(),
        ));
    }
    if decomposition.dimensions.is_empty() || !decomposition.is_consistent() {
        return Err(PipelineError::InvalidConfig(
            "decomposition has a dimension without instantiations or no dimensions".into(),
        ));
    }
    let run_id = run_id_for(&task, config, Some(&decomposition));
    let lineage = Lineage {
        split: "train".into(),
        disjoint_from_run: None,
    };
    generate_episodes(gateway, &task, decomposition, config, run_id, lineage, progress)
}

fn generate_episodes(
    gateway: &Gateway,
    task: &TaskSpec,
    decomposition: Decomposition,
    config: &RunConfig,
    run_id: String,
    lineage: Lineage,
    progress: &mut dyn FnMut(&ProgressEvent),
) -> Result<RunOutput, PipelineError> {
    progress(&ProgressEvent::Decomposed {
        dimensions: decomposition.dimensions.len(),
        instantiations: decomposition.instantiations.len(),
    });
    let created_at = now_or(&config.created_at);
    let ctx = RunContext {
        gateway,
        task,
        decomposition: &decomposition,
        config,
        run_id: &run_id,
        created_at: &created_at,
    };
    let target = config.target_size as u64;
    let mut dataset = Vec::new();
    let mut transcripts = Vec::new();
    let mut rejects = Vec::new();
    let mut counters = Counters::default();
    let mut by_template = gateway.call_counts();
    let mut seen_inputs = BTreeSet::new();
    let mut budget_hit = false;
    let mut fatal: Option<GatewayError> = None;

    let next = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<EpisodeReport>();
    std::thread::scope(|s| {
        for _ in 0..config.parallel_episodes {
            let tx = tx.clone();
            let (ctx, next, stop) = (&ctx, &next, &stop);
            s.spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    if tx.send(ctx.run_episode(index)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);

        let mut pending: BTreeMap<u64, EpisodeReport> = BTreeMap::new();
        let mut next_commit = 0u64;
        for report in rx.iter() {
            pending.insert(report.index, report);
            if stop.load(Ordering::SeqCst) && !budget_hit {
                continue;
            }
            while let Some(report) = pending.remove(&next_commit) {
                next_commit += 1;
                if counters.accepted == target {
                    break;
                }
                match &report.result {
                    EpisodeResult::Fatal(e) => {
                        fatal = Some(e.clone());
                        stop.store(true, Ordering::SeqCst);
                        break;
                    }
                    EpisodeResult::Aborted => {
                        budget_hit = true;
                        stop.store(true, Ordering::SeqCst);
                    }
                    _ => {}
                }
                commit(
                    report,
                    config,
                    &mut counters,
                    &mut by_template,
                    &mut dataset,
                    &mut rejects,
                    &mut transcripts,
                    &mut seen_inputs,
                    progress,
                    target,
                );
                if counters.accepted == target {
                    stop.store(true, Ordering::SeqCst);
                    break;
                }
            }
        }
        // After a budget stop, later episodes that did finish are still kept.
        if budget_hit {
            for (_, report) in std::mem::take(&mut pending) {
                if counters.accepted == target {
                    break;
                }
                commit(
                    report,
                    config,
                    &mut counters,
                    &mut by_template,
                    &mut dataset,
                    &mut rejects,
                    &mut transcripts,
                    &mut seen_inputs,
                    progress,
                    target,
                );
            }
        }
    });

    if let Some(e) = fatal {
        return Err(PipelineError::Gateway(e));
    }
    counters.completions_total = by_template.values().sum();
    let status = if counters.accepted == target {
        RunStatus::Complete
    } else {
        RunStatus::Incomplete {
            reason: format!(
                "completion budget of {} calls exhausted",
                gateway.config().max_completions
            ),
        }
    };
    progress(&ProgressEvent::Finished {
        status: status.clone(),
        accepted: counters.accepted,
    });
    let mut manifest = RunManifest::for_decomposition(&run_id, task, decomposition, gateway, &created_at);
    manifest.config = Some(config.clone());
    manifest.counters = counters;
    manifest.completions_by_template = by_template
        .into_iter()
        .map(|(k, v)| (k.as_str().to_string(), v))
        .collect();
    manifest.status = status;
    manifest.lineage = lineage;
    let output = RunOutput {
        dataset,
        manifest,
        transcripts,
        rejects,
    };
    if budget_hit || output.manifest.status != RunStatus::Complete {
        return Err(PipelineError::BudgetExceeded {
            cap: gateway.config().max_completions,
            partial: Box::new(output),
        });
    }
    Ok(output)
}

#[allow(clippy::too_many_arguments)]
fn commit(
    report: EpisodeReport,
    config: &RunConfig,
    counters: &mut Counters,
    by_template: &mut BTreeMap<TemplateId, u64>,
    dataset: &mut Vec<DatasetRecord>,
    rejects: &mut Vec<RejectRecord>,
    transcripts: &mut Vec<DebateTranscript>,
    seen_inputs: &mut BTreeSet<String>,
    progress: &mut dyn FnMut(&ProgressEvent),
    target: u64,
) {
    counters.episodes_started += 1;
    counters.refinements_total += report.refinements as u64;
    for (t, n) in &report.completions {
        *by_template.entry(*t).or_default() += n;
    }
    transcripts.extend(report.transcripts);
    let status = match report.result {
        EpisodeResult::Accepted(record) => {
            if config.dedup_samples && !seen_inputs.insert(record.sample.input.content.clone()) {
                counters.rejected_discarded += 1;
                rejects.push(RejectRecord {
                    episode: report.index,
                    dimension_id: record.sample.dimension_id.clone(),
                    instantiation_id: record.sample.instantiation_id.clone(),
                    target_label: record.sample.target_label.clone(),
                    reason: RejectReason::Duplicate,
                    generator_calls: report.generator_calls,
                    debates: record.sample.refinement_round + 1,
                    attempts: 1,
                    transcript_ids: vec![record.transcript_id.clone()],
                    last_sample: Some(record.sample),
                });
                "duplicate"
            } else {
                counters.accepted += 1;
                dataset.push(record);
                "accepted"
            }
        }
        EpisodeResult::Rejected(r) => {
            counters.rejected_discarded += 1;
            rejects.push(r);
            "rejected"
        }
        EpisodeResult::Aborted | EpisodeResult::Fatal(_) => {
            counters.in_flight_at_abort += 1;
            "aborted"
        }
    };
    progress(&ProgressEvent::Episode {
        index: report.index,
        status: status.into(),
        accepted: counters.accepted,
        target,
    });
}

/// Checks every record against the transcript that accepted it.
pub fn audit(output: &RunOutput) -> bool {
    let by_id: BTreeMap<&str, &DebateTranscript> = output.transcripts.iter().map(|t| (t.id.as_str(), t)).collect();
    output.dataset.iter().all(|r| {
        by_id
            .get(r.transcript_id.as_str())
            .is_some_and(|t| t.is_consistent() && crate::debate::record_matches_transcript(r, t))
    })
}

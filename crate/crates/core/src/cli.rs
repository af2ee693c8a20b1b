//! Command-line surface.
//!
//! Exit codes: 0 success, 2 invalid input or validation failure, 3 provider
//! failure, 4 completion budget exhausted. Settings resolve as flags, then
//! the TOML file given by `--config`, then environment, then defaults.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytics::{
    accuracy, coverage_csv, coverage_curve, label_balance, path_histogram_from_log, refinement_stats, AnalyticsError,
    GatewayRelevance, GoldItem, Prediction, Report,
};
use crate::dataset::{
    export_chat, ingest_seeds, read_dataset, read_jsonl, read_manifest, write_manifest, write_run, DatasetError,
    DatasetLine,
};
use crate::debate::DebateConfig;
use crate::dimension::decompose_and_instantiate;
use crate::gateway::live::{LiveBackend, LiveConfig, ENV_MODEL};
use crate::gateway::mock::ScriptedBackend;
use crate::gateway::{
    Backend, CompletionRequest, Gateway, GatewayConfig, GatewayError, Parsed, ReasoningEffort, ResponseSchema,
    TemplateId,
};
use crate::pipeline::{
    run, run_id_for, run_with_decomposition, PipelineError, ProgressEvent, RunConfig, RunManifest, RunOutput, EPOCH,
};
use crate::task::{InputBlock, InputKind, LabelSet, TaskSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

pub const ENV_BACKEND: &str = "GUARDSYNTH_BACKEND";
pub const ENV_MAX_COMPLETIONS: &str = "GUARDSYNTH_MAX_COMPLETIONS";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Oracle(g) => g.into(),
            other => Self::input(other.to_string()),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        let code = match e {
            GatewayError::BudgetExceeded { .. } => EXIT_BUDGET,
            GatewayError::Template(_) => EXIT_INPUT,
            _ => EXIT_PROVIDER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = if e.is_budget() {
            EXIT_BUDGET
        } else {
            match &e {
                PipelineError::Gateway(g) => return g.clone().into(),
                PipelineError::DecompositionFailed(crate::dimension::DimensionError::Gateway(g)) => {
                    return Self {
                        code: CliError::from(g.clone()).code,
                        message: e.to_string(),
                    }
                }
                _ => EXIT_INPUT,
            }
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "guardsynth",
    version,
    about = "Synthetic training data for custom guardrail classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract dimensions and instantiations and write them to a manifest.
    Decompose(DecomposeArgs),
    /// Generate a dataset, decomposing first unless a manifest is given.
    Generate(GenerateArgs),
    /// Summarize debate logs, datasets and coverage.
    Report(ReportArgs),
    /// Score a classifier on a labeled dataset with the classification prompt.
    Eval(EvalArgs),
    /// Write the chat-format classification export of a dataset.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// `mock:<scenario.json>`, `live` or `live:<model>`.
    #[arg(long)]
    pub backend: Option<String>,
    /// TOML settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cap on provider calls for the whole command.
    #[arg(long)]
    pub max_completions: Option<u64>,
    /// Line-delimited JSON progress events on standard error.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Task file (JSON).
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub task: PathBuf,
    /// Manifest from `decompose`; its decomposition is reused as is.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub judges: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub r_max: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Print the resolved run configuration as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub debate_log: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Needed to decode dataset labels and for coverage.
    #[arg(long)]
    pub task: Option<PathBuf>,
    /// Dataset-format file of samples to rate for coverage.
    #[arg(long)]
    pub coverage_samples: Option<PathBuf>,
    /// Manifest providing the instantiations for coverage.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Instantiation counts for the coverage curve, e.g. `1,2,4,8`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labeled items in dataset format.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub task: PathBuf,
    /// `live:<model>` or `mock:<scenario.json>`.
    #[arg(long)]
    pub classifier: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Task file contents. `seeds_path` is relative to the task file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub criterion: String,
    #[serde(default = "binary")]
    pub labels: Vec<String>,
    #[serde(alias = "seeds-path")]
    pub seeds_path: PathBuf,
    #[serde(default)]
    pub kind: InputKind,
    #[serde(default, alias = "domain-hint")]
    pub domain_hint: Option<String>,
}

fn binary() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

pub fn load_task(path: &Path) -> Result<TaskSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let file: TaskFile =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let seeds_path = path.parent().unwrap_or(Path::new(".")).join(&file.seeds_path);
    let seeds = ingest_seeds(&seeds_path, file.kind)?;
    let mut task = TaskSpec::new(file.criterion, LabelSet::new(file.labels), seeds);
    task.domain_hint = file.domain_hint;
    task.validate().map_err(|e| CliError::input(e.to_string()))
}

/// Settings shared by every layer of configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub backend: Option<String>,
    pub model: Option<String>,
    pub reasoning_effort: Option<ReasoningEffort>,
    pub max_completions: Option<u64>,
    pub n: Option<usize>,
    pub judges: Option<usize>,
    pub rounds: Option<usize>,
    pub r_max: Option<u32>,
    pub seed: Option<u64>,
    pub parallel: Option<usize>,
    pub created_at: Option<String>,
    pub weighted_instantiation_sampling: Option<bool>,
    pub label_compatibility_filter: Option<bool>,
    pub dedup_samples: Option<bool>,
    pub advocate_in_round1: Option<bool>,
    pub dedup_threshold: Option<f64>,
}

impl Settings {
    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: self.$f.or(lower.$f)),* } };
        }
        pick!(
            backend,
            model,
            reasoning_effort,
            max_completions,
            n,
            judges,
            rounds,
            r_max,
            seed,
            parallel,
            created_at,
            weighted_instantiation_sampling,
            label_compatibility_filter,
            dedup_samples,
            advocate_in_round1,
            dedup_threshold
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn from_env() -> Result<Settings, CliError> {
        let max_completions = match std::env::var(ENV_MAX_COMPLETIONS) {
            Ok(v) => Some(
                v.parse()
                    .map_err(|_| CliError::input(format!("{ENV_MAX_COMPLETIONS}={v} is not a count")))?,
            ),
            Err(_) => None,
        };
        Ok(Settings {
            backend: std::env::var(ENV_BACKEND).ok(),
            model: std::env::var(ENV_MODEL).ok(),
            max_completions,
            ..Settings::default()
        })
    }

    fn resolve(flags: Settings, config: Option<&Path>) -> Result<Settings, CliError> {
        let file = match config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        Ok(flags.over(file).over(Settings::from_env()?))
    }

    pub fn is_mock(&self) -> bool {
        self.backend.as_deref().is_some_and(|b| b.starts_with("mock:"))
    }

    pub fn run_config(&self) -> RunConfig {
        let d = RunConfig::default();
        let judges = self.judges.unwrap_or(d.debate.judge_count);
        let rounds = self.rounds.unwrap_or(d.debate.max_rounds);
        let mut debate = DebateConfig::with_judges(judges, rounds);
        debate.advocate_in_round1 = self.advocate_in_round1.unwrap_or(false);
        let mut cfg = RunConfig {
            target_size: self.n.unwrap_or(d.target_size),
            debate,
            rng_seed: self.seed.unwrap_or(d.rng_seed),
            parallel_episodes: self.parallel.unwrap_or(d.parallel_episodes),
            weighted_instantiation_sampling: self.weighted_instantiation_sampling.unwrap_or(false),
            label_compatibility_filter: self.label_compatibility_filter.unwrap_or(false),
            dedup_samples: self.dedup_samples.unwrap_or(false),
            created_at: self
                .created_at
                .clone()
                .or_else(|| self.is_mock().then(|| EPOCH.to_string())),
            ..d
        };
        if let Some(r) = self.r_max {
            cfg.generation.r_max = r;
        }
        if let Some(t) = self.dedup_threshold {
            cfg.decomposition.dedup_threshold = t;
        }
        cfg
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        let mut g = GatewayConfig::default();
        if let Some(m) = self.max_completions {
            g.max_completions = m;
        }
        if let Some(e) = self.reasoning_effort {
            g.model.reasoning_effort = e;
        }
        if let Some(m) = &self.model {
            g.model.model = m.clone();
        }
        g
    }
}

/// Builds a backend from `mock:<path>`, `live` or `live:<model>`. A model
/// named in the spec overrides `model`.
pub fn backend_from_spec(spec: &str, model: &mut Option<String>) -> Result<Arc<dyn Backend>, CliError> {
    if let Some(path) = spec.strip_prefix("mock:") {
        let b = ScriptedBackend::from_path(Path::new(path)).map_err(CliError::input)?;
        return Ok(Arc::new(b));
    }
    if spec == "live" || spec.starts_with("live:") {
        if let Some(m) = spec.strip_prefix("live:").filter(|m| !m.is_empty()) {
            *model = Some(m.to_string());
        }
        return Ok(Arc::new(LiveBackend::new(LiveConfig::from_env())));
    }
    Err(CliError::input(format!(
        "unknown backend {spec:?}; expected mock:<file>, live or live:<model>"
    )))
}

fn gateway(settings: &Settings) -> Result<Gateway, CliError> {
    let spec = settings
        .backend
        .clone()
        .ok_or_else(|| CliError::input(format!("no backend given; pass --backend or set {ENV_BACKEND}")))?;
    let mut s = settings.clone();
    let backend = backend_from_spec(&spec, &mut s.model)?;
    Ok(Gateway::new(backend, s.gateway_config()))
}

fn common_flags(c: &CommonArgs) -> Settings {
    Settings {
        backend: c.backend.clone(),
        max_completions: c.max_completions,
        ..Settings::default()
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn progress_sink<'a>(enabled: bool, err: &'a mut dyn Write) -> impl FnMut(&ProgressEvent) + 'a {
    move |e: &ProgressEvent| {
        if enabled {
            let _ = writeln!(err, "{}", serde_json::to_string(e).expect("event serializes"));
        }
    }
}

fn cmd_decompose(args: DecomposeArgs, io: &mut Io) -> Result<(), CliError> {
    let flags = Settings {
        seed: args.seed,
        ..common_flags(&args.common)
    };
    let settings = Settings::resolve(flags, args.common.config.as_deref())?;
    let task = load_task(&args.task)?;
    let gw = gateway(&settings)?;
    let cfg = settings.run_config();
    let run_id = run_id_for(&task, &cfg, None);
    let decompose_cfg = crate::dimension::DecomposeConfig {
        rng_seed: cfg.rng_seed,
        ..cfg.decomposition.clone()
    };
    let decomposition = decompose_and_instantiate(&gw, &task, &run_id, &decompose_cfg)
        .map_err(|e| CliError::from(PipelineError::DecompositionFailed(e)))?;
    let created_at = cfg
        .created_at
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let (dims, insts) = (decomposition.dimensions.len(), decomposition.instantiations.len());
    let manifest = RunManifest::for_decomposition(&run_id, &task, decomposition, &gw, &created_at);
    write_manifest(&manifest, &args.out)?;
    if args.common.progress {
        let _ = writeln!(
            io.err,
            "{}",
            serde_json::to_string(&ProgressEvent::Decomposed {
                dimensions: dims,
                instantiations: insts
            })
            .expect("event serializes")
        );
    }
    let _ = writeln!(
        io.out,
        "{dims} dimensions, {insts} instantiations -> {}",
        args.out.display()
    );
    Ok(())
}

fn cmd_generate(args: GenerateArgs, io: &mut Io) -> Result<(), CliError> {
    let flags = Settings {
        n: args.n,
        judges: args.judges,
        rounds: args.rounds,
        r_max: args.r_max,
        seed: args.seed,
        parallel: args.parallel,
        ..common_flags(&args.common)
    };
    let settings = Settings::resolve(flags, args.common.config.as_deref())?;
    let cfg = settings.run_config();
    if args.print_config {
        let _ = writeln!(
            io.out,
            "{}",
            serde_json::to_string_pretty(&cfg).expect("config serializes")
        );
        return Ok(());
    }
    cfg.validate()?;
    let task = load_task(&args.task)?;
    let gw = gateway(&settings)?;
    let mut progress = progress_sink(args.common.progress, io.err);
    let result = match &args.manifest {
        Some(path) => {
            let manifest = read_manifest(path)?;
            if manifest.task_fingerprint != task.fingerprint() {
                return Err(CliError::input(format!(
                    "{} was decomposed from a different task",
                    path.display()
                )));
            }
            run_with_decomposition(&gw, &task, manifest.decomposition, &cfg, &mut progress)
        }
        None => run(&gw, &task, &cfg, &mut progress),
    };
    let (output, error): (RunOutput, Option<CliError>) = match result {
        Ok(o) => (o, None),
        Err(PipelineError::BudgetExceeded { cap, partial }) => {
            let e = CliError {
                code: EXIT_BUDGET,
                message: format!(
                    "completion budget of {cap} calls exhausted; {} of {} samples written",
                    partial.dataset.len(),
                    cfg.target_size
                ),
            };
            (*partial, Some(e))
        }
        Err(e) => return Err(e.into()),
    };
    write_run(&output, &task.labels, &args.out_dir)?;
    let c = output.manifest.counters;
    let issued = gw.completions_used();
    let extra = if issued > c.completions_total {
        format!(
            " ({} more spent on episodes past the target)",
            issued - c.completions_total
        )
    } else {
        String::new()
    };
    let _ = writeln!(
        io.out,
        "{} accepted, {} discarded, {} refinements, {} completions{extra} -> {}",
        c.accepted,
        c.rejected_discarded,
        c.refinements_total,
        c.completions_total,
        args.out_dir.display()
    );
    error.map_or(Ok(()), Err)
}

fn dataset_lines(path: &Path) -> Result<Vec<DatasetLine>, CliError> {
    Ok(read_jsonl(path)?)
}

fn cmd_report(args: ReportArgs, io: &mut Io) -> Result<(), CliError> {
    let mut report = Report {
        paths: None,
        label_balance: None,
        refinement: None,
        coverage: Vec::new(),
    };
    if let Some(log) = &args.debate_log {
        let text = std::fs::read_to_string(log).map_err(|e| CliError::input(format!("{}: {e}", log.display())))?;
        report.paths = Some(path_histogram_from_log(&text)?);
    }
    let task = args.task.as_deref().map(load_task).transpose()?;
    if let Some(ds) = &args.dataset {
        let labels = task.as_ref().map_or_else(LabelSet::binary, |t| t.labels.clone());
        let records = read_dataset(ds, &labels)?;
        report.label_balance = Some(label_balance(&records, &labels));
        report.refinement = Some(refinement_stats(&records));
    }
    if let Some(samples_path) = &args.coverage_samples {
        let manifest_path = args
            .manifest
            .as_ref()
            .ok_or_else(|| CliError::input("coverage needs --manifest for the instantiations"))?;
        let task = task
            .as_ref()
            .ok_or_else(|| CliError::input("coverage needs --task for the criterion"))?;
        let manifest = read_manifest(manifest_path)?;
        let samples: Vec<InputBlock> = dataset_lines(samples_path)?
            .into_iter()
            .map(|l| InputBlock::new(l.input_block, l.kind))
            .collect();
        let insts = manifest.decomposition.instantiations;
        let sizes = if args.sizes.is_empty() {
            vec![insts.len()]
        } else {
            args.sizes.clone()
        };
        let settings = Settings::resolve(common_flags(&args.common), args.common.config.as_deref())?;
        let gw = gateway(&settings)?;
        let oracle = GatewayRelevance {
            gateway: &gw,
            criterion: &task.criterion,
        };
        report.coverage = coverage_curve(&samples, &insts, &sizes, &oracle, args.threshold)?;
    }
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Text => report.to_text(),
        Format::Csv => {
            let mut s = report.paths.as_ref().map(|p| p.to_csv()).unwrap_or_default();
            if !report.coverage.is_empty() {
                s.push_str(&coverage_csv(&report.coverage));
            }
            s
        }
    };
    let _ = io.out.write_all(text.as_bytes());
    Ok(())
}

fn cmd_eval(args: EvalArgs, io: &mut Io) -> Result<(), CliError> {
    let task = load_task(&args.task)?;
    let items = read_dataset(&args.input, &task.labels)?;
    let flags = Settings {
        backend: Some(args.classifier.clone()),
        ..common_flags(&args.common)
    };
    let settings = Settings::resolve(flags, args.common.config.as_deref())?;
    let mut gcfg = settings.gateway_config();
    // a malformed answer is scored, not retried
    gcfg.parse_retries = 0;
    let mut model = settings.model.clone();
    let backend = backend_from_spec(&args.classifier, &mut model)?;
    if let Some(m) = model {
        gcfg.model.model = m;
    }
    let gw = Gateway::new(backend, gcfg);

    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    let mut warnings = 0usize;
    for (i, r) in items.iter().enumerate() {
        let id = format!("{i}:{}", r.transcript_id);
        let req = CompletionRequest::new(TemplateId::Classification, ResponseSchema::SingleCharLabel)
            .labels(&task.labels)
            .with("rule", &task.criterion)
            .with("input_block", &r.sample.input.content);
        let label = match gw.complete(&req) {
            Ok(c) => match c.value {
                Parsed::Label(l) => Some(l),
                other => unreachable!("single-char schema parsed as {other:?}"),
            },
            Err(e @ GatewayError::BudgetExceeded { .. }) => return Err(e.into()),
            Err(e @ GatewayError::UnscriptedRequest { .. }) => return Err(e.into()),
            Err(e) => {
                warnings += 1;
                let _ = writeln!(
                    io.err,
                    "warning: line {} ({}) scored incorrect: {e}",
                    i + 1,
                    r.transcript_id
                );
                None
            }
        };
        predictions.push(Prediction { id: id.clone(), label });
        gold.push(GoldItem {
            id,
            label: r.sample.target_label.clone(),
        });
    }
    let acc = accuracy(&predictions, &gold)?;
    let correct = predictions
        .iter()
        .zip(&gold)
        .filter(|(p, g)| p.label.as_ref() == Some(&g.label))
        .count();
    match args.format {
        Format::Json => {
            let v = serde_json::json!({"accuracy": acc, "correct": correct, "total": gold.len(), "unparsed": warnings});
            let _ = writeln!(io.out, "{v}");
        }
        _ => {
            let _ = writeln!(io.out, "accuracy {acc:.4} ({correct}/{})", gold.len());
        }
    }
    Ok(())
}

fn cmd_export(args: ExportArgs, io: &mut Io) -> Result<(), CliError> {
    let task = load_task(&args.task)?;
    let records = read_dataset(&args.dataset, &task.labels)?;
    let n = export_chat(&records, &task, &args.out)?;
    let _ = writeln!(io.out, "{n} examples -> {}", args.out.display());
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let mut io = Io { out, err };
    let result = match cli.command {
        Command::Decompose(a) => cmd_decompose(a, &mut io),
        Command::Generate(a) => cmd_generate(a, &mut io),
        Command::Report(a) => cmd_report(a, &mut io),
        Command::Eval(a) => cmd_eval(a, &mut io),
        Command::Export(a) => cmd_export(a, &mut io),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.err, "error: {}", e.message);
            e.code
        }
    }
}

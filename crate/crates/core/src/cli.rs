//! Command-line surface: profile corpora, run generation jobs, evaluate
//! outputs, inspect features, and diff prompt modes.
//!
//! All artifacts land under `--out`; stdout carries human-readable
//! summaries only. Configuration precedence is flags > environment >
//! config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::artifact::{ArtifactMode, TemplateSet};
use crate::backend::{Backend, DecodingConfig, HttpBackend, MockBackend};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, Classifier, EvalConfig, EvaluationReport, Normalization, SkippedInput,
};
use crate::extract::{make_spec, TaskKind};
use crate::metrics::{extract_profile, AoaLexicon, FlagId};
use crate::orchestrator::{
    GenerationJob, GenerationResult, LoopConfig, Orchestrator, Termination,
};
use crate::profile::{
    compute_profile, corpus_stats, load_corpus, load_profile, save_profile, GoldProfile,
};
use crate::standard::{LevelId, Registry, Standard};

#[derive(Debug, Parser)]
#[command(
    name = "standardize",
    about = "Standard-aligned story generation and evaluation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Compute a gold profile from a labeled corpus.
    Profile(ProfileArgs),
    /// Run generation jobs against a backend.
    Generate(GenerateArgs),
    /// Score generation results against a gold profile.
    Evaluate(EvaluateArgs),
    /// Print the linguistic flags of a text file.
    Features(FeaturesArgs),
    /// Run every prompt mode on one spec and compare outcomes.
    Compare(CompareArgs),
}

/// Options shared by commands that talk to a backend.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// OpenAI-compatible endpoint base URL (enables the HTTP backend).
    #[arg(long)]
    pub base_url: Option<String>,
    /// Mock backend script file: a JSON array of responses.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Mock backend in compliant mode (obeys rewrite directives).
    #[arg(long)]
    pub mock_compliant: bool,
    /// Model identifier sent to the HTTP backend.
    #[arg(long)]
    pub model: Option<String>,
    /// Minimum generated words.
    #[arg(long)]
    pub min_new_tokens: Option<usize>,
    /// Maximum generated words.
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    /// Nucleus sampling probability mass.
    #[arg(long)]
    pub top_p: Option<f64>,
    /// Sampling temperature; omitted from requests when unset.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Rewrite-loop cap for signal mode.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// JSON config file supplying defaults for any of the above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Corpus: JSONL file or directory of per-level subdirectories.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Standard id (cefr|ccs) or path to a standard JSON file.
    #[arg(long)]
    pub standard: String,
    /// Output profile JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Flags to profile (comma separated); defaults to the standard's
    /// bound flags.
    #[arg(long, value_delimiter = ',')]
    pub flags: Vec<String>,
    /// Age-of-acquisition lexicon TSV; defaults to the bundled lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Prompt style: teacher|aspect|exemplar|signal.
    #[arg(long)]
    pub mode: String,
    /// Standard id (cefr|ccs) or path to a standard JSON file.
    #[arg(long)]
    pub standard: String,
    /// Target level (repeatable via --levels for batches).
    #[arg(long)]
    pub level: Option<String>,
    /// Comma-separated levels for batch runs.
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<String>,
    /// Theme word for a single theme-word job.
    #[arg(long)]
    pub theme: Option<String>,
    /// File of theme words (one per line) for batch theme-word jobs.
    #[arg(long)]
    pub themes_file: Option<PathBuf>,
    /// Inline context paragraph for a context-assisted job.
    #[arg(long)]
    pub context: Option<String>,
    /// File holding the context paragraph.
    #[arg(long)]
    pub context_file: Option<PathBuf>,
    /// Gold profile JSON (required for signal mode).
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Output directory for result files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Maximum concurrent jobs.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Age-of-acquisition lexicon TSV; defaults to the bundled lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Directory of prompt template files overriding the bundled set.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of GenerationResult JSON files.
    #[arg(long)]
    pub results: PathBuf,
    /// Gold profile JSON.
    #[arg(long)]
    pub profile: PathBuf,
    /// Standard id (cefr|ccs) or path to a standard JSON file.
    #[arg(long)]
    pub standard: String,
    /// Output directory for report.json and report.csv.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Distance normalization: raw|zscore.
    #[arg(long, default_value = "raw")]
    pub distance_normalization: String,
    /// External classifier command (reads profile JSON on stdin, prints a
    /// level id). Defaults to the built-in nearest-centroid classifier.
    #[arg(long)]
    pub classifier_cmd: Option<String>,
    /// Age-of-acquisition lexicon TSV; defaults to the bundled lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Text file to analyze.
    #[arg(long)]
    pub text: PathBuf,
    /// Flags to compute (comma separated); defaults to all supported flags.
    #[arg(long, value_delimiter = ',')]
    pub flags: Vec<String>,
    /// Age-of-acquisition lexicon TSV; defaults to the bundled lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Standard id (cefr|ccs) or path to a standard JSON file.
    #[arg(long)]
    pub standard: String,
    /// Target level.
    #[arg(long)]
    pub level: String,
    /// Theme word payload.
    #[arg(long)]
    pub theme: Option<String>,
    /// Inline context paragraph.
    #[arg(long)]
    pub context: Option<String>,
    /// File holding the context paragraph.
    #[arg(long)]
    pub context_file: Option<PathBuf>,
    /// Gold profile JSON (used for signal mode and for scoring all rows).
    #[arg(long)]
    pub profile: PathBuf,
    /// Output directory for compare.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Age-of-acquisition lexicon TSV; defaults to the bundled lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Directory of prompt template files overriding the bundled set.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

/// Config-file shape; any field may be omitted. CLI flags win over these.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    pub base_url: Option<String>,
    pub model_id: Option<String>,
    pub mock_script: Option<PathBuf>,
    #[serde(default)]
    pub mock_compliant: bool,
    pub min_new_tokens: Option<usize>,
    pub max_new_tokens: Option<usize>,
    pub top_p: Option<f64>,
    pub temperature: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Fully resolved backend + decoding + loop settings.
pub struct RunConfig {
    pub backend: Box<dyn Backend>,
    pub decoding: DecodingConfig,
    pub loop_config: LoopConfig,
}

impl RunConfig {
    /// Merge flags over the optional config file. Exactly one backend must
    /// come out of the merge.
    pub fn resolve(args: &BackendArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let base_url = args.base_url.clone().or(file.base_url);
        let mock_script = args.mock_script.clone().or(file.mock_script);
        let mock_compliant = args.mock_compliant || file.mock_compliant;

        let mut backends_configured = 0;
        backends_configured += usize::from(base_url.is_some());
        backends_configured += usize::from(mock_script.is_some());
        backends_configured += usize::from(mock_compliant);
        if backends_configured != 1 {
            return Err(Error::InvalidInput(format!(
                "exactly one backend must be configured \
                 (--base-url, --mock-script, or --mock-compliant); found {backends_configured}"
            )));
        }
        let backend: Box<dyn Backend> = if let Some(url) = base_url {
            Box::new(HttpBackend::new(&url))
        } else if let Some(script) = mock_script {
            Box::new(MockBackend::from_script_file(&script)?)
        } else {
            Box::new(MockBackend::compliant())
        };

        let mut decoding = DecodingConfig::default();
        if let Some(v) = args.model.clone().or(file.model_id) {
            decoding.model_id = v;
        }
        if let Some(v) = args.min_new_tokens.or(file.min_new_tokens) {
            decoding.min_new_tokens = v;
        }
        if let Some(v) = args.max_new_tokens.or(file.max_new_tokens) {
            decoding.max_new_tokens = v;
        }
        if let Some(v) = args.top_p.or(file.top_p) {
            decoding.top_p = v;
        }
        if let Some(v) = args.temperature.or(file.temperature) {
            decoding.temperature = Some(v);
        }
        decoding.validate()?;

        let mut loop_config = LoopConfig::default();
        if let Some(v) = args.max_iterations.or(file.max_iterations) {
            loop_config.max_iterations = v;
        }
        Ok(RunConfig {
            backend,
            decoding,
            loop_config,
        })
    }
}

/// Load a standard by bundled id or by file path.
pub fn resolve_standard(spec: &str) -> Result<Standard> {
    let path = Path::new(spec);
    if path.exists() && path.is_file() {
        return Standard::load(path);
    }
    match spec {
        "cefr" => Ok(Standard::bundled_cefr()),
        "ccs" => Ok(Standard::bundled_ccs()),
        other => Err(Error::UnknownStandard(other.to_string())),
    }
}

fn resolve_lexicon(path: &Option<PathBuf>) -> Result<AoaLexicon> {
    match path {
        Some(p) => AoaLexicon::load(p),
        None => Ok(AoaLexicon::bundled()),
    }
}

fn resolve_templates(path: &Option<PathBuf>) -> Result<TemplateSet> {
    match path {
        Some(p) => TemplateSet::from_dir(p),
        None => Ok(TemplateSet::bundled()),
    }
}

fn parse_flags(names: &[String], standard: &Standard) -> Result<Vec<FlagId>> {
    if names.is_empty() {
        return Ok(standard.bound_flags());
    }
    names
        .iter()
        .map(|name| FlagId::from_str(name.trim()))
        .collect()
}

/// Exit status for an error: 2 for bad input or usage, 1 for runtime
/// failures.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Backend { .. }
        | Error::Transport { .. }
        | Error::LengthEnforcementExhausted { .. }
        | Error::External(_) => 1,
        _ => 2,
    }
}

/// Dispatch a parsed command line. Returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        CliCommand::Profile(args) => cmd_profile(&args),
        CliCommand::Generate(args) => cmd_generate(&args),
        CliCommand::Evaluate(args) => cmd_evaluate(&args),
        CliCommand::Features(args) => cmd_features(&args),
        CliCommand::Compare(args) => cmd_compare(&args),
    };
    match outcome {
        Ok(status) => status,
        Err(error) => {
            eprintln!("error: {error}");
            exit_code(&error)
        }
    }
}

pub fn cmd_profile(args: &ProfileArgs) -> Result<i32> {
    let standard = resolve_standard(&args.standard)?;
    let lexicon = resolve_lexicon(&args.lexicon)?;
    let flags = parse_flags(&args.flags, &standard)?;
    let corpus = load_corpus(&args.corpus, &standard)?;
    let profile = compute_profile(&corpus, &flags, &lexicon)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_profile(&profile, &args.out)?;

    let stats = corpus_stats(&corpus)?;
    println!(
        "{:<12} {:>6} {:>18} {:>22}",
        "Level", "Size", "Avg Word Count", "Avg Sentence Count"
    );
    for level in &standard.levels {
        if let Some(row) = stats.get(level) {
            println!(
                "{:<12} {:>6} {:>18.2} {:>22.2}",
                level.as_str(),
                row.n,
                row.avg_word_count,
                row.avg_sentence_count
            );
        }
    }
    println!("profile written to {}", args.out.display());
    Ok(0)
}

fn read_themes(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let themes: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    if themes.is_empty() {
        return Err(Error::InvalidInput(format!(
            "theme file {} is empty",
            path.display()
        )));
    }
    Ok(themes)
}

/// Build the job list from the payload/level options.
fn build_jobs(
    args: &GenerateArgs,
    standard: &Standard,
    mode: ArtifactMode,
    decoding: &DecodingConfig,
    loop_config: LoopConfig,
    gold: &Option<GoldProfile>,
) -> Result<Vec<GenerationJob>> {
    let mut registry = Registry::new();
    registry.add(standard.clone())?;

    let mut levels: Vec<String> = args.levels.clone();
    if let Some(level) = &args.level {
        if !levels.contains(level) {
            levels.insert(0, level.clone());
        }
    }
    if levels.is_empty() {
        return Err(Error::InvalidInput(
            "provide --level or --levels".to_string(),
        ));
    }

    let payloads: Vec<(TaskKind, String)> = if let Some(theme) = &args.theme {
        vec![(TaskKind::ThemeWord, theme.clone())]
    } else if let Some(file) = &args.themes_file {
        read_themes(file)?
            .into_iter()
            .map(|t| (TaskKind::ThemeWord, t))
            .collect()
    } else if let Some(context) = &args.context {
        vec![(TaskKind::ContextAssisted, context.clone())]
    } else if let Some(file) = &args.context_file {
        vec![(
            TaskKind::ContextAssisted,
            std::fs::read_to_string(file)?.trim().to_string(),
        )]
    } else {
        return Err(Error::InvalidInput(
            "provide a payload: --theme, --themes-file, --context, or --context-file".to_string(),
        ));
    };

    let mut jobs = Vec::new();
    for level in &levels {
        for (task, payload) in &payloads {
            let spec = make_spec(&registry, &standard.id, level, *task, payload)?;
            let slug: String = match task {
                TaskKind::ThemeWord => payload.to_lowercase(),
                TaskKind::ContextAssisted => "context".to_string(),
            };
            jobs.push(GenerationJob {
                id: format!(
                    "{:03}_{}_{}_{}_{}",
                    jobs.len(),
                    standard.id,
                    level,
                    mode,
                    sanitize(&slug)
                ),
                spec,
                mode,
                decoding: decoding.clone(),
                loop_config,
                profile: gold.clone(),
            });
        }
    }
    Ok(jobs)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .take(40)
        .collect()
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<i32> {
    let standard = resolve_standard(&args.standard)?;
    let lexicon = resolve_lexicon(&args.lexicon)?;
    let templates = resolve_templates(&args.templates)?;
    let mode = ArtifactMode::from_str(&args.mode)?;
    let run_config = RunConfig::resolve(&args.backend)?;

    let gold = match (&args.profile, mode) {
        (Some(path), _) => Some(load_profile(path)?),
        (None, ArtifactMode::Signal) => {
            return Err(Error::InvalidInput(
                "signal mode requires --profile".to_string(),
            ))
        }
        (None, _) => None,
    };

    let jobs = build_jobs(
        args,
        &standard,
        mode,
        &run_config.decoding,
        run_config.loop_config,
        &match mode {
            ArtifactMode::Signal => gold,
            _ => None,
        },
    )?;

    std::fs::create_dir_all(&args.out)?;
    let orchestrator = Orchestrator::new(standard, templates, lexicon);
    let results = orchestrator.run_batch(&jobs, run_config.backend.as_ref(), args.parallel);

    let mut failures = 0usize;
    for (job, outcome) in jobs.iter().zip(results) {
        match outcome {
            Ok(result) => {
                let json_path = args.out.join(format!("{}.json", job.id));
                let text_path = args.out.join(format!("{}.txt", job.id));
                result.save(&json_path)?;
                std::fs::write(&text_path, &result.final_text)?;
                let distance = result
                    .iterations
                    .last()
                    .and_then(|it| it.distance_to_gold)
                    .map(|d| format!("{d:.2}"))
                    .unwrap_or_else(|| "-".to_string());
                println!(
                    "{:<40} {:<15} iters={} distance={}",
                    job.id,
                    termination_name(result.terminated_by),
                    result.iterations.len(),
                    distance
                );
            }
            Err(error) => {
                failures += 1;
                let error_path = args.out.join(format!("{}.error.json", job.id));
                let payload = serde_json::json!({
                    "job_id": job.id,
                    "error": error.to_string(),
                });
                std::fs::write(&error_path, format!("{payload:#}\n"))?;
                eprintln!("{}: error: {error}", job.id);
            }
        }
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIterations => "max_iterations",
        Termination::SingleShot => "single_shot",
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let standard = resolve_standard(&args.standard)?;
    let lexicon = resolve_lexicon(&args.lexicon)?;
    let gold = load_profile(&args.profile)?;
    let normalization = Normalization::from_str(&args.distance_normalization)?;

    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.results)
        .map_err(|_| {
            Error::InvalidInput(format!("results not found: {}", args.results.display()))
        })?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && !p.to_string_lossy().ends_with(".error.json")
        })
        .collect();
    paths.sort();

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for path in &paths {
        match GenerationResult::load(path) {
            Ok(result) => results.push(result),
            Err(error) => {
                eprintln!("warning: skipping {}: {error}", path.display());
                skipped.push(SkippedInput {
                    source: path
                        .file_name()
                        .map(|n| n.to_string_lossy().to_string())
                        .unwrap_or_default(),
                    reason: error.to_string(),
                });
            }
        }
    }
    if results.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no readable result files in {}",
            args.results.display()
        )));
    }

    let config = EvalConfig {
        distance_normalization: normalization,
        classifier: match &args.classifier_cmd {
            Some(cmd) => Classifier::External(cmd.clone()),
            None => Classifier::NearestCentroid,
        },
        ..EvalConfig::default()
    };
    let mut report = evaluate(&results, &gold, &standard, &config, &lexicon)?;
    report.summary.skipped = skipped;

    std::fs::create_dir_all(&args.out)?;
    report.save_json(&args.out.join("report.json"))?;
    report.save_csv(&args.out.join("report.csv"))?;

    print_report_summary(&report, &standard);
    Ok(if report.summary.skipped.is_empty() { 0 } else { 1 })
}

fn print_report_summary(report: &EvaluationReport, standard: &Standard) {
    let summary = &report.summary;
    match summary.adjacent_accuracy {
        Some(adjacent) => {
            println!(
                "{:<8} {:>18} {:>18} {:>22}",
                "Items", "Precise Accuracy", "Adjacent Accuracy", "Diversity (distinct-n)"
            );
            println!(
                "{:<8} {:>18.3} {:>18.3} {:>22.3}",
                summary.n_items, summary.precise_accuracy, adjacent, summary.mean_distinct_n
            );
        }
        None => {
            println!(
                "{:<8} {:>18} {:>22}",
                "Items", "Precise Accuracy", "Diversity (distinct-n)"
            );
            println!(
                "{:<8} {:>18.3} {:>22.3}",
                summary.n_items, summary.precise_accuracy, summary.mean_distinct_n
            );
        }
    }
    println!("\nMean distance to gold by intended level:");
    for level in &standard.levels {
        if let Some(d) = summary.per_level_mean_distance.get(level) {
            println!("  {:<12} {d:>10.2}", level.as_str());
        }
    }
    if !summary.skipped.is_empty() {
        println!("\nSkipped inputs: {}", summary.skipped.len());
    }
}

pub fn cmd_features(args: &FeaturesArgs) -> Result<i32> {
    let lexicon = resolve_lexicon(&args.lexicon)?;
    let text = std::fs::read_to_string(&args.text)
        .map_err(|_| Error::InvalidInput(format!("text not found: {}", args.text.display())))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let flags: Vec<FlagId> = if args.flags.is_empty() {
        FlagId::ALL.to_vec()
    } else {
        args.flags
            .iter()
            .map(|name| FlagId::from_str(name.trim()))
            .collect::<Result<_>>()
            .map_err(|e| match e {
                Error::UnknownFlag(name) => Error::InvalidInput(format!(
                    "unknown flag `{name}`; supported flags: {}",
                    FlagId::supported_names()
                )),
                other => other,
            })?
    };
    let fv = extract_profile(&text, &flags, &lexicon)?;
    let mut text_out = serde_json::to_string_pretty(&fv)?;
    text_out.push('\n');
    print!("{text_out}");
    Ok(0)
}

/// One row of the mode-comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub mode: ArtifactMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated_by: Option<Termination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_to_gold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_level: Option<LevelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let standard = resolve_standard(&args.standard)?;
    let lexicon = resolve_lexicon(&args.lexicon)?;
    let templates = resolve_templates(&args.templates)?;
    let run_config = RunConfig::resolve(&args.backend)?;
    let gold = load_profile(&args.profile)?;

    let mut registry = Registry::new();
    registry.add(standard.clone())?;
    let (task, payload): (TaskKind, String) = if let Some(theme) = &args.theme {
        (TaskKind::ThemeWord, theme.clone())
    } else if let Some(context) = &args.context {
        (TaskKind::ContextAssisted, context.clone())
    } else if let Some(file) = &args.context_file {
        (
            TaskKind::ContextAssisted,
            std::fs::read_to_string(file)?.trim().to_string(),
        )
    } else {
        return Err(Error::InvalidInput(
            "provide a payload: --theme, --context, or --context-file".to_string(),
        ));
    };
    let spec = make_spec(&registry, &standard.id, &args.level, task, &payload)?;
    let level_stats = gold.level(&spec.level)?;

    let orchestrator = Orchestrator::new(standard.clone(), templates, lexicon.clone());
    let modes = [
        ArtifactMode::Teacher,
        ArtifactMode::Aspect,
        ArtifactMode::Exemplar,
        ArtifactMode::Signal,
    ];
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for mode in modes {
        let job = GenerationJob {
            id: format!("compare_{mode}"),
            spec: spec.clone(),
            mode,
            decoding: run_config.decoding.clone(),
            loop_config: run_config.loop_config,
            profile: match mode {
                ArtifactMode::Signal => Some(gold.clone()),
                _ => None,
            },
        };
        match orchestrator.run(&job, run_config.backend.as_ref()) {
            Ok(result) => {
                let fv = extract_profile(&result.final_text, &gold.flags, &lexicon)?;
                let distance = crate::eval::euclidean_distance(
                    &fv.values,
                    &level_stats.mean,
                    &gold.flags,
                    Normalization::Raw,
                    None,
                )?;
                let predicted =
                    crate::eval::classify(&fv, &gold, &standard, Normalization::ZScore)?;
                rows.push(CompareRow {
                    mode,
                    terminated_by: Some(result.terminated_by),
                    iterations: Some(result.iterations.len()),
                    distance_to_gold: Some(distance),
                    predicted_level: Some(predicted),
                    error: None,
                });
            }
            Err(error) => {
                failures += 1;
                rows.push(CompareRow {
                    mode,
                    terminated_by: None,
                    iterations: None,
                    distance_to_gold: None,
                    predicted_level: None,
                    error: Some(error.to_string()),
                });
            }
        }
    }

    std::fs::create_dir_all(&args.out)?;
    let payload = serde_json::json!({ "spec": spec, "rows": rows });
    std::fs::write(
        args.out.join("compare.json"),
        format!("{payload:#}\n"),
    )?;

    println!(
        "{:<10} {:<15} {:>6} {:>12} {:>11}",
        "Mode", "Terminated", "Iters", "Distance", "Predicted"
    );
    for row in &rows {
        match &row.error {
            None => println!(
                "{:<10} {:<15} {:>6} {:>12.2} {:>11}",
                row.mode.to_string(),
                row.terminated_by.map(termination_name).unwrap_or("-"),
                row.iterations.unwrap_or(0),
                row.distance_to_gold.unwrap_or(f64::NAN),
                row.predicted_level
                    .as_ref()
                    .map(|l| l.as_str())
                    .unwrap_or("-")
            ),
            Some(error) => println!("{:<10} error: {error}", row.mode.to_string()),
        }
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_standard_by_id_and_path() {
        assert_eq!(resolve_standard("cefr").unwrap().id, "cefr");
        assert_eq!(resolve_standard("ccs").unwrap().id, "ccs");
        assert!(matches!(
            resolve_standard("nope"),
            Err(Error::UnknownStandard(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.json");
        std::fs::write(&path, Standard::bundled_cefr().to_json().unwrap()).unwrap();
        assert_eq!(
            resolve_standard(path.to_str().unwrap()).unwrap().id,
            "cefr"
        );
    }

    #[test]
    fn run_config_requires_exactly_one_backend() {
        let none = BackendArgs::default();
        assert!(RunConfig::resolve(&none).is_err());

        let two = BackendArgs {
            mock_compliant: true,
            base_url: Some("http://localhost:1".to_string()),
            ..BackendArgs::default()
        };
        assert!(RunConfig::resolve(&two).is_err());

        let one = BackendArgs {
            mock_compliant: true,
            ..BackendArgs::default()
        };
        assert!(RunConfig::resolve(&one).is_ok());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"mock_compliant": true, "top_p": 0.5, "max_iterations": 7}"#,
        )
        .unwrap();
        let args = BackendArgs {
            config: Some(path),
            top_p: Some(0.9),
            ..BackendArgs::default()
        };
        let resolved = RunConfig::resolve(&args).unwrap();
        assert_eq!(resolved.decoding.top_p, 0.9);
        assert_eq!(resolved.loop_config.max_iterations, 7);
    }
}

//! Python bindings for the standardize pipeline.
//!
//! Exposes the main operations as flat functions returning plain Python
//! structures (dicts, lists, numbers): standards lookup, prompt-to-spec
//! extraction, linguistic flags, gold profiling, prompt building, mock- or
//! HTTP-backed generation, and evaluation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;

use standardize::artifact::{
    build_aspect_prompt, build_exemplar_prompt, build_rewrite_prompt, build_teacher_prompt,
    make_directives, verbalize, ArtifactMode, TemplateSet,
};
use standardize::backend::{self, Backend, DecodingConfig, HttpBackend, MockBackend};
use standardize::cli::resolve_standard;
use standardize::error::Error;
use standardize::eval::{self, EvalConfig, Normalization};
use standardize::extract::{self, TaskKind};
use standardize::metrics::{self, AoaLexicon, FlagId};
use standardize::orchestrator::{GenerationJob, GenerationResult, LoopConfig, Orchestrator};
use standardize::profile::{self, GoldProfile};
use standardize::standard::{LevelId, Registry, Standard};

fn py_err(error: Error) -> PyErr {
    PyValueError::new_err(error.to_string())
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    match value {
        Value::Null => Ok(py.None()),
        Value::Bool(b) => b.into_py_any(py),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py_any(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py_any(py)
            }
        }
        Value::String(s) => s.into_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, value) in map {
                dict.set_item(key, json_to_py(py, value)?)?;
            }
            dict.into_py_any(py)
        }
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyValueError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &json)
}

fn standard_of(spec: &str) -> PyResult<Standard> {
    resolve_standard(spec).map_err(py_err)
}

fn lexicon_of(path: Option<&str>) -> PyResult<AoaLexicon> {
    match path {
        Some(p) => AoaLexicon::load(Path::new(p)).map_err(py_err),
        None => Ok(AoaLexicon::bundled()),
    }
}

fn flags_of(names: Option<Vec<String>>, standard: Option<&Standard>) -> PyResult<Vec<FlagId>> {
    match names {
        Some(names) => names
            .iter()
            .map(|n| FlagId::from_str(n).map_err(py_err))
            .collect(),
        None => Ok(match standard {
            Some(s) => s.bound_flags(),
            None => FlagId::ALL.to_vec(),
        }),
    }
}

/// Bundled standard ids.
#[pyfunction]
fn standards() -> Vec<String> {
    Registry::bundled()
        .standards()
        .iter()
        .map(|s| s.id.clone())
        .collect()
}

/// Full standard definition (id, name, levels, aspects, exemplars) as a dict.
#[pyfunction]
fn standard_info(py: Python<'_>, standard: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &standard_of(standard)?)
}

/// Descriptors, exemplars, and bound flags for one level.
#[pyfunction]
fn lookup(py: Python<'_>, standard: &str, level: &str) -> PyResult<Py<PyAny>> {
    let standard = standard_of(standard)?;
    let spec = standard.lookup(&LevelId::from(level)).map_err(py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("level", level)?;
    let descriptors = PyDict::new(py);
    for (aspect, text) in &spec.descriptors {
        descriptors.set_item(&aspect.name, *text)?;
    }
    dict.set_item("descriptors", descriptors)?;
    dict.set_item(
        "exemplars",
        spec.exemplars.iter().map(|e| e.citation()).collect::<Vec<_>>(),
    )?;
    dict.set_item(
        "flags",
        spec.flags.iter().map(|f| f.name()).collect::<Vec<_>>(),
    )?;
    dict.into_py_any(py)
}

/// `|index(a) - index(b)|` on the standard's level scale.
#[pyfunction]
fn level_distance(standard: &str, a: &str, b: &str) -> PyResult<usize> {
    standard_of(standard)?
        .level_distance(&LevelId::from(a), &LevelId::from(b))
        .map_err(py_err)
}

/// Parse a free-form prompt into `{standard_id, level, task, payload}`.
#[pyfunction]
fn extract_spec(py: Python<'_>, prompt: &str) -> PyResult<Py<PyAny>> {
    let registry = Registry::bundled();
    let spec = extract::extract(prompt, &registry).map_err(py_err)?;
    to_py(py, &spec)
}

/// Linguistic flags of a text. `flags` defaults to all supported flags.
#[pyfunction]
#[pyo3(signature = (text, flags=None, lexicon_path=None))]
fn features(
    py: Python<'_>,
    text: &str,
    flags: Option<Vec<String>>,
    lexicon_path: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let lexicon = lexicon_of(lexicon_path)?;
    let flags = flags_of(flags, None)?;
    let fv = metrics::extract_profile(text, &flags, &lexicon).map_err(py_err)?;
    to_py(py, &fv)
}

/// Render a prompt artifact; returns `{text, mode, provenance}`.
#[pyfunction]
#[pyo3(signature = (mode, standard, level, theme=None, context=None))]
fn build_prompt(
    py: Python<'_>,
    mode: &str,
    standard: &str,
    level: &str,
    theme: Option<&str>,
    context: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let standard = standard_of(standard)?;
    let mut registry = Registry::new();
    registry.add(standard.clone()).map_err(py_err)?;
    let (task, payload) = match (theme, context) {
        (Some(theme), None) => (TaskKind::ThemeWord, theme),
        (None, Some(context)) => (TaskKind::ContextAssisted, context),
        _ => {
            return Err(PyValueError::new_err(
                "provide exactly one of theme= or context=",
            ))
        }
    };
    let spec =
        extract::make_spec(&registry, &standard.id, level, task, payload).map_err(py_err)?;
    let templates = TemplateSet::bundled();
    let artifact = match ArtifactMode::from_str(mode).map_err(py_err)? {
        ArtifactMode::Teacher => build_teacher_prompt(&spec, &standard, &templates),
        ArtifactMode::Aspect => build_aspect_prompt(&spec, &standard, &templates),
        ArtifactMode::Exemplar => build_exemplar_prompt(&spec, &standard, &templates),
        ArtifactMode::Signal => Err(Error::InvalidInput(
            "signal prompts are produced by the rewrite loop; use generate()".to_string(),
        )),
    }
    .map_err(py_err)?;
    to_py(py, &artifact)
}

/// Compute a gold profile from a labeled corpus (JSONL file or per-level
/// directory). Returns the profile as a dict in the profile JSON schema.
#[pyfunction]
#[pyo3(signature = (corpus_path, standard, flags=None, lexicon_path=None))]
fn profile_corpus(
    py: Python<'_>,
    corpus_path: &str,
    standard: &str,
    flags: Option<Vec<String>>,
    lexicon_path: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let standard = standard_of(standard)?;
    let lexicon = lexicon_of(lexicon_path)?;
    let flags = flags_of(flags, Some(&standard))?;
    let corpus = profile::load_corpus(Path::new(corpus_path), &standard).map_err(py_err)?;
    let gold = profile::compute_profile(&corpus, &flags, &lexicon).map_err(py_err)?;
    to_py(py, &gold)
}

/// Directives for a text against a stored profile, plus their verbalization
/// and the full rewrite prompt.
#[pyfunction]
fn directives_for(
    py: Python<'_>,
    text: &str,
    profile_path: &str,
    level: &str,
) -> PyResult<Py<PyAny>> {
    let gold: GoldProfile = profile::load_profile(Path::new(profile_path)).map_err(py_err)?;
    let lexicon = AoaLexicon::bundled();
    let fv = metrics::extract_profile(text, &gold.flags, &lexicon).map_err(py_err)?;
    let directives = make_directives(&fv, &gold, &LevelId::from(level)).map_err(py_err)?;
    let rendered = verbalize(&directives).map_err(py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("directives", to_py(py, &directives)?)?;
    dict.set_item("text", rendered)?;
    let rewrite =
        build_rewrite_prompt(text, &directives, &TemplateSet::bundled()).map_err(py_err)?;
    dict.set_item("rewrite_prompt", rewrite.text)?;
    dict.into_py_any(py)
}

/// Run one generation job and return the full result (audit trail included).
///
/// Backend selection: `base_url` for an OpenAI-compatible endpoint,
/// `mock_script` for a scripted mock, neither for the compliant mock.
#[pyfunction]
#[pyo3(signature = (mode, standard, level, theme=None, context=None, profile_path=None,
                    base_url=None, mock_script=None, model=None, max_iterations=None,
                    lexicon_path=None))]
#[allow(clippy::too_many_arguments)]
fn generate(
    py: Python<'_>,
    mode: &str,
    standard: &str,
    level: &str,
    theme: Option<&str>,
    context: Option<&str>,
    profile_path: Option<&str>,
    base_url: Option<&str>,
    mock_script: Option<&str>,
    model: Option<&str>,
    max_iterations: Option<usize>,
    lexicon_path: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let standard = standard_of(standard)?;
    let lexicon = lexicon_of(lexicon_path)?;
    let mut registry = Registry::new();
    registry.add(standard.clone()).map_err(py_err)?;
    let (task, payload) = match (theme, context) {
        (Some(theme), None) => (TaskKind::ThemeWord, theme),
        (None, Some(context)) => (TaskKind::ContextAssisted, context),
        _ => {
            return Err(PyValueError::new_err(
                "provide exactly one of theme= or context=",
            ))
        }
    };
    let spec =
        extract::make_spec(&registry, &standard.id, level, task, payload).map_err(py_err)?;
    let gold = match profile_path {
        Some(path) => Some(profile::load_profile(Path::new(path)).map_err(py_err)?),
        None => None,
    };
    let mut decoding = DecodingConfig::default();
    if let Some(model) = model {
        decoding.model_id = model.to_string();
    }
    let mut loop_config = LoopConfig::default();
    if let Some(cap) = max_iterations {
        loop_config.max_iterations = cap;
    }
    let job = GenerationJob {
        id: format!("py_{}_{level}_{mode}", standard.id),
        spec,
        mode: ArtifactMode::from_str(mode).map_err(py_err)?,
        decoding,
        loop_config,
        profile: gold,
    };
    let backend: Box<dyn Backend> = match (base_url, mock_script) {
        (Some(url), None) => Box::new(HttpBackend::new(url)),
        (None, Some(script)) => {
            Box::new(MockBackend::from_script_file(&PathBuf::from(script)).map_err(py_err)?)
        }
        (None, None) => Box::new(MockBackend::compliant()),
        (Some(_), Some(_)) => {
            return Err(PyValueError::new_err(
                "provide at most one of base_url= or mock_script=",
            ))
        }
    };
    let orchestrator = Orchestrator::new(standard, TemplateSet::bundled(), lexicon);
    let result = orchestrator.run(&job, backend.as_ref()).map_err(py_err)?;
    to_py(py, &result)
}

/// Evaluate a directory of result JSON files against a stored profile.
#[pyfunction]
#[pyo3(signature = (results_dir, profile_path, standard, lexicon_path=None))]
fn evaluate_dir(
    py: Python<'_>,
    results_dir: &str,
    profile_path: &str,
    standard: &str,
    lexicon_path: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let standard = standard_of(standard)?;
    let lexicon = lexicon_of(lexicon_path)?;
    let gold = profile::load_profile(Path::new(profile_path)).map_err(py_err)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(results_dir)
        .map_err(|e| PyValueError::new_err(format!("results dir: {e}")))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut results = Vec::new();
    for path in &paths {
        results.push(GenerationResult::load(path).map_err(py_err)?);
    }
    if results.is_empty() {
        return Err(PyValueError::new_err("no result files found"));
    }
    let report = eval::evaluate(&results, &gold, &standard, &EvalConfig::default(), &lexicon)
        .map_err(py_err)?;
    to_py(py, &report)
}

/// Fraction of exact level matches.
#[pyfunction]
fn precise_accuracy(preds: Vec<String>, golds: Vec<String>) -> PyResult<f64> {
    let preds: Vec<LevelId> = preds.iter().map(|s| LevelId::from(s.as_str())).collect();
    let golds: Vec<LevelId> = golds.iter().map(|s| LevelId::from(s.as_str())).collect();
    eval::precise_accuracy(&preds, &golds).map_err(py_err)
}

/// Fraction of matches counting one level off as correct. Raises for
/// binary standards.
#[pyfunction]
fn adjacent_accuracy(preds: Vec<String>, golds: Vec<String>, standard: &str) -> PyResult<f64> {
    let standard = standard_of(standard)?;
    let preds: Vec<LevelId> = preds.iter().map(|s| LevelId::from(s.as_str())).collect();
    let golds: Vec<LevelId> = golds.iter().map(|s| LevelId::from(s.as_str())).collect();
    eval::adjacent_accuracy(&preds, &golds, &standard).map_err(py_err)
}

/// Distinct n-grams over total n-grams of the lowercased token stream.
#[pyfunction]
fn distinct_n(text: &str, n: usize) -> PyResult<f64> {
    eval::distinct_n(text, n).map_err(py_err)
}

/// Classify a text against a stored profile with the nearest-centroid
/// classifier (z-scored). Returns the predicted level id.
#[pyfunction]
#[pyo3(signature = (text, profile_path, standard, lexicon_path=None))]
fn classify_text(
    text: &str,
    profile_path: &str,
    standard: &str,
    lexicon_path: Option<&str>,
) -> PyResult<String> {
    let standard = standard_of(standard)?;
    let lexicon = lexicon_of(lexicon_path)?;
    let gold = profile::load_profile(Path::new(profile_path)).map_err(py_err)?;
    let fv = metrics::extract_profile(text, &gold.flags, &lexicon).map_err(py_err)?;
    let level = eval::classify(&fv, &gold, &standard, Normalization::ZScore).map_err(py_err)?;
    Ok(level.as_str().to_string())
}

/// Deterministic synthetic text with the requested shape; handy for demos
/// and for building corpora the compliant mock can match.
#[pyfunction]
fn synth_text(words: usize, sentences: usize, types: usize) -> String {
    backend::synth_text(words, sentences, types)
}

#[pymodule]
fn standardize_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(standards, m)?)?;
    m.add_function(wrap_pyfunction!(standard_info, m)?)?;
    m.add_function(wrap_pyfunction!(lookup, m)?)?;
    m.add_function(wrap_pyfunction!(level_distance, m)?)?;
    m.add_function(wrap_pyfunction!(extract_spec, m)?)?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(profile_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(directives_for, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_dir, m)?)?;
    m.add_function(wrap_pyfunction!(precise_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(adjacent_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(distinct_n, m)?)?;
    m.add_function(wrap_pyfunction!(classify_text, m)?)?;
    m.add_function(wrap_pyfunction!(synth_text, m)?)?;
    Ok(())
}

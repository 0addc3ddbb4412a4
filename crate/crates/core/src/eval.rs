//! Alignment scoring: precise and adjacent accuracy, Euclidean distance to
//! gold profiles, distinct-n diversity, a nearest-centroid level classifier,
//! and machine-readable reports.
//!
//! The default classifier is nearest-centroid over z-scored flags; it is
//! deterministic and needs no training data. A subprocess adapter lets
//! callers plug in an external model instead: the configured command
//! receives the feature vector as JSON on stdin and must print one level id.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{extract_profile, segment, AoaLexicon, FeatureVector, FlagId};
use crate::orchestrator::GenerationResult;
use crate::profile::GoldProfile;
use crate::standard::{LevelId, Standard};

/// Feature scaling applied before distance computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Distances over raw flag values.
    Raw,
    /// Per-flag differences divided by a standard deviation.
    ZScore,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "zscore" => Ok(Normalization::ZScore),
            other => Err(Error::InvalidInput(format!(
                "unknown normalization `{other}` (expected raw|zscore)"
            ))),
        }
    }
}

/// Fraction of positions where `preds[i] == golds[i]`.
pub fn precise_accuracy(preds: &[LevelId], golds: &[LevelId]) -> Result<f64> {
    check_lengths(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Fraction of positions where the predicted level is at most one step from
/// the gold level on the standard's scale. Binary standards have no useful
/// notion of adjacency, so they are rejected as not applicable.
pub fn adjacent_accuracy(
    preds: &[LevelId],
    golds: &[LevelId],
    standard: &Standard,
) -> Result<f64> {
    check_lengths(preds, golds)?;
    if standard.levels.len() < 3 {
        return Err(Error::NotApplicable(format!(
            "adjacent accuracy is undefined for binary standard `{}`",
            standard.id
        )));
    }
    let mut hits = 0usize;
    for (pred, gold) in preds.iter().zip(golds) {
        if standard.level_distance(pred, gold)? <= 1 {
            hits += 1;
        }
    }
    Ok(hits as f64 / preds.len() as f64)
}

fn check_lengths(preds: &[LevelId], golds: &[LevelId]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::InvalidInput("empty label lists".to_string()));
    }
    if preds.len() != golds.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} predictions vs {} golds",
            preds.len(),
            golds.len()
        )));
    }
    Ok(())
}

/// Euclidean distance over `flags`: `sqrt(sum_f (a_f' - b_f')^2)` where
/// values pass through unchanged (raw) or differences are divided by the
/// per-flag standard deviation in `std` (zscore).
pub fn euclidean_distance(
    a: &BTreeMap<FlagId, f64>,
    b: &BTreeMap<FlagId, f64>,
    flags: &[FlagId],
    normalization: Normalization,
    std: Option<&BTreeMap<FlagId, f64>>,
) -> Result<f64> {
    let mut sum = 0.0f64;
    for &flag in flags {
        let av = *a
            .get(&flag)
            .ok_or_else(|| Error::MissingFlag(flag.name().to_string()))?;
        let bv = *b
            .get(&flag)
            .ok_or_else(|| Error::MissingFlag(flag.name().to_string()))?;
        let diff = match normalization {
            Normalization::Raw => av - bv,
            Normalization::ZScore => {
                let std = std.ok_or_else(|| {
                    Error::InvalidInput("zscore normalization requires std values".to_string())
                })?;
                let sd = *std
                    .get(&flag)
                    .ok_or_else(|| Error::MissingFlag(flag.name().to_string()))?;
                if sd <= 0.0 {
                    return Err(Error::ZeroStd(flag.name().to_string()));
                }
                (av - bv) / sd
            }
        };
        sum += diff * diff;
    }
    Ok(sum.sqrt())
}

/// Mean distance of feature vectors to the gold mean of `level`.
pub fn mean_distance(
    items: &[FeatureVector],
    profile: &GoldProfile,
    level: &LevelId,
    normalization: Normalization,
) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::InvalidInput("no items to score".to_string()));
    }
    let stats = profile.level(level)?;
    let mut total = 0.0f64;
    for item in items {
        total += euclidean_distance(
            &item.values,
            &stats.mean,
            &profile.flags,
            normalization,
            Some(&stats.std),
        )?;
    }
    Ok(total / items.len() as f64)
}

/// Distinct n-grams divided by total n-grams over the lowercased token
/// stream.
pub fn distinct_n(text: &str, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".to_string()));
    }
    let t = segment(text)?;
    let tokens: Vec<String> = t.tokens().map(|w| w.to_lowercase()).collect();
    if tokens.len() < n {
        return Err(Error::InvalidInput(format!(
            "text has {} tokens, fewer than n = {n}",
            tokens.len()
        )));
    }
    let total = tokens.len() - n + 1;
    let distinct: std::collections::HashSet<&[String]> = tokens.windows(n).collect();
    Ok(distinct.len() as f64 / total as f64)
}

/// Per-flag standard deviation pooled across levels, weighted by level
/// size: `sqrt(sum_L n_L * var_{L,f} / sum_L n_L)`. This is the scaling the
/// z-scored classifier uses, shared by all centroids so the argmin stays
/// well defined.
pub fn pooled_std(profile: &GoldProfile) -> BTreeMap<FlagId, f64> {
    let mut out = BTreeMap::new();
    let total_n: usize = profile.levels.values().map(|l| l.n).sum();
    for &flag in &profile.flags {
        let weighted: f64 = profile
            .levels
            .values()
            .map(|l| l.n as f64 * l.std[&flag] * l.std[&flag])
            .sum();
        out.insert(flag, (weighted / total_n as f64).sqrt());
    }
    out
}

/// How predicted levels are produced.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "command")]
pub enum Classifier {
    /// Nearest gold centroid under the configured normalization; ties break
    /// toward the lower ordinal level.
    #[default]
    NearestCentroid,
    /// Spawn a shell command; write the feature vector JSON to stdin, read
    /// one level id line from stdout.
    External(String),
}

/// Nearest-centroid classification of a feature vector against the gold
/// profile. With z-score normalization (the default for evaluation),
/// differences are scaled by the pooled per-flag std.
pub fn classify(
    profile: &FeatureVector,
    gold: &GoldProfile,
    standard: &Standard,
    normalization: Normalization,
) -> Result<LevelId> {
    let std = match normalization {
        Normalization::ZScore => Some(pooled_std(gold)),
        Normalization::Raw => None,
    };
    let mut best: Option<(usize, f64, LevelId)> = None;
    for (level, stats) in &gold.levels {
        let distance = euclidean_distance(
            &profile.values,
            &stats.mean,
            &gold.flags,
            normalization,
            std.as_ref(),
        )?;
        let ordinal = standard.level_index(level)?;
        let better = match &best {
            None => true,
            Some((best_ordinal, best_distance, _)) => {
                distance < *best_distance
                    || (distance == *best_distance && ordinal < *best_ordinal)
            }
        };
        if better {
            best = Some((ordinal, distance, level.clone()));
        }
    }
    best.map(|(_, _, level)| level)
        .ok_or_else(|| Error::InvalidInput("gold profile has no levels".to_string()))
}

fn classify_external(command: &str, profile: &FeatureVector) -> Result<LevelId> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::External(format!("spawn `{command}`: {e}")))?;
    let payload = serde_json::to_string(profile)?;
    child
        .stdin
        .take()
        .expect("stdin piped")
        .write_all(payload.as_bytes())
        .map_err(|e| Error::External(format!("write to `{command}`: {e}")))?;
    let output = child
        .wait_with_output()
        .map_err(|e| Error::External(format!("wait on `{command}`: {e}")))?;
    if !output.status.success() {
        return Err(Error::External(format!(
            "`{command}` exited with {}",
            output.status
        )));
    }
    let line = String::from_utf8_lossy(&output.stdout)
        .lines()
        .next()
        .map(str::trim)
        .unwrap_or_default()
        .to_string();
    if line.is_empty() {
        return Err(Error::External(format!("`{command}` printed no level id")));
    }
    Ok(LevelId(line))
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Normalization used by the classifier (z-score by default).
    pub classifier_normalization: Normalization,
    /// Normalization used for reported distances (raw by default, matching
    /// the magnitudes of distance tables computed on raw flags).
    pub distance_normalization: Normalization,
    pub classifier: Classifier,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            classifier_normalization: Normalization::ZScore,
            distance_normalization: Normalization::Raw,
            classifier: Classifier::NearestCentroid,
        }
    }
}

/// Per-item evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationItem {
    pub source_id: String,
    pub text: String,
    pub intended_level: LevelId,
    pub predicted_level: LevelId,
    pub profile: FeatureVector,
    pub distance_to_gold: f64,
    /// Keyed by n; distinct-1 and distinct-2 by default.
    pub distinct_n: BTreeMap<usize, f64>,
}

/// Aggregates over a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub n_items: usize,
    pub precise_accuracy: f64,
    /// Absent for binary standards.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacent_accuracy: Option<f64>,
    /// Mean distance to the intended level's gold mean, per level.
    pub per_level_mean_distance: BTreeMap<LevelId, f64>,
    /// Mean of distinct-1 and distinct-2 over all items.
    pub mean_distinct_n: f64,
    /// Input files that could not be read, with reasons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedInput {
    pub source: String,
    pub reason: String,
}

/// The full report: `{summary: {...}, items: [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub summary: EvaluationSummary,
    pub items: Vec<EvaluationItem>,
}

impl EvaluationReport {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Flat per-item CSV: source_id, intended, predicted, distance,
    /// distinct1, distinct2.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("source_id,intended,predicted,distance,distinct1,distinct2\n");
        for item in &self.items {
            let d1 = item.distinct_n.get(&1).copied().unwrap_or(f64::NAN);
            let d2 = item.distinct_n.get(&2).copied().unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                item.source_id,
                item.intended_level,
                item.predicted_level,
                item.distance_to_gold,
                d1,
                d2
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Score a batch of generation results against a gold profile.
pub fn evaluate(
    results: &[GenerationResult],
    gold: &GoldProfile,
    standard: &Standard,
    config: &EvalConfig,
    lexicon: &AoaLexicon,
) -> Result<EvaluationReport> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no results to evaluate".to_string()));
    }
    let mut items = Vec::with_capacity(results.len());
    for result in results {
        let profile = extract_profile(&result.final_text, &gold.flags, lexicon)?;
        let intended = result.spec.level.clone();
        let stats = gold.level(&intended)?;
        let distance = euclidean_distance(
            &profile.values,
            &stats.mean,
            &gold.flags,
            config.distance_normalization,
            Some(&stats.std),
        )?;
        let predicted = match &config.classifier {
            Classifier::NearestCentroid => {
                classify(&profile, gold, standard, config.classifier_normalization)?
            }
            Classifier::External(command) => classify_external(command, &profile)?,
        };
        let mut distinct = BTreeMap::new();
        for n in [1usize, 2] {
            distinct.insert(n, distinct_n(&result.final_text, n)?);
        }
        items.push(EvaluationItem {
            source_id: result.job_id.clone(),
            text: result.final_text.clone(),
            intended_level: intended,
            predicted_level: predicted,
            profile,
            distance_to_gold: distance,
            distinct_n: distinct,
        });
    }
    Ok(EvaluationReport {
        summary: summarize(&items, standard)?,
        items,
    })
}

/// Aggregate per-item rows; adjacent accuracy is omitted for binary
/// standards.
pub fn summarize(items: &[EvaluationItem], standard: &Standard) -> Result<EvaluationSummary> {
    if items.is_empty() {
        return Err(Error::InvalidInput("no items to summarize".to_string()));
    }
    let preds: Vec<LevelId> = items.iter().map(|i| i.predicted_level.clone()).collect();
    let golds: Vec<LevelId> = items.iter().map(|i| i.intended_level.clone()).collect();
    let precise = precise_accuracy(&preds, &golds)?;
    let adjacent = match adjacent_accuracy(&preds, &golds, standard) {
        Ok(value) => Some(value),
        Err(Error::NotApplicable(_)) => None,
        Err(other) => return Err(other),
    };
    let mut per_level: BTreeMap<LevelId, (f64, usize)> = BTreeMap::new();
    let mut distinct_sum = 0.0f64;
    for item in items {
        let entry = per_level
            .entry(item.intended_level.clone())
            .or_insert((0.0, 0));
        entry.0 += item.distance_to_gold;
        entry.1 += 1;
        let d1 = item.distinct_n.get(&1).copied().unwrap_or(0.0);
        let d2 = item.distinct_n.get(&2).copied().unwrap_or(0.0);
        distinct_sum += (d1 + d2) / 2.0;
    }
    Ok(EvaluationSummary {
        n_items: items.len(),
        precise_accuracy: precise,
        adjacent_accuracy: adjacent,
        per_level_mean_distance: per_level
            .into_iter()
            .map(|(level, (sum, n))| (level, sum / n as f64))
            .collect(),
        mean_distinct_n: distinct_sum / items.len() as f64,
        skipped: Vec::new(),
    })
}

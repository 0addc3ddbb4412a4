//! Prompt artifacts: the four prompt styles and the verbalizer.
//!
//! The teacher-style baseline names only the level and the task payload.
//! The three knowledge-artifact styles inject content retrieved from the
//! standard: aspect descriptors, exemplar citations, or directional
//! linguistic-signal instructions produced by comparing measured flags
//! against a gold profile. Templates are external text files with
//! `{{placeholder}}` syntax so the exact wording stays auditable.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{TargetSpec, TaskKind};
use crate::metrics::{FeatureVector, FlagId};
use crate::profile::GoldProfile;
use crate::standard::{LevelId, Standard};

/// The four prompt styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactMode {
    Teacher,
    Aspect,
    Exemplar,
    Signal,
}

impl std::fmt::Display for ArtifactMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ArtifactMode::Teacher => "teacher",
            ArtifactMode::Aspect => "aspect",
            ArtifactMode::Exemplar => "exemplar",
            ArtifactMode::Signal => "signal",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ArtifactMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher" => Ok(ArtifactMode::Teacher),
            "aspect" => Ok(ArtifactMode::Aspect),
            "exemplar" => Ok(ArtifactMode::Exemplar),
            "signal" => Ok(ArtifactMode::Signal),
            other => Err(Error::InvalidInput(format!(
                "unknown mode `{other}` (expected teacher|aspect|exemplar|signal)"
            ))),
        }
    }
}

/// A fully rendered prompt plus a record of which standard content produced
/// each injected fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptArtifact {
    pub mode: ArtifactMode,
    pub text: String,
    /// `(source, fragment)` pairs; empty only for teacher mode.
    pub provenance: Vec<(String, String)>,
}

/// Whether a measured flag should move up, down, or stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
    Hold,
}

/// One flag comparison against the gold profile of the target level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalDirective {
    pub flag: FlagId,
    pub current: f64,
    pub target_mean: f64,
    pub target_std: f64,
    pub direction: Direction,
}

/// Tolerance band around the target mean inside which a flag holds:
/// `max(0.05 * |mean|, 0.25 * std)`. The relative part scales with the
/// flag's magnitude; the std floor keeps low-variance flags from
/// oscillating.
pub fn hold_band(target_mean: f64, target_std: f64) -> f64 {
    (0.05 * target_mean.abs()).max(0.25 * target_std)
}

/// Direction for one flag under the band rule.
pub fn direction_for(current: f64, target_mean: f64, target_std: f64) -> Direction {
    let band = hold_band(target_mean, target_std);
    if current < target_mean - band {
        Direction::Increase
    } else if current > target_mean + band {
        Direction::Decrease
    } else {
        Direction::Hold
    }
}

/// The template files used to render prompts.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    teacher_context: String,
    teacher_theme: String,
    aspect_context: String,
    aspect_theme: String,
    exemplar_context: String,
    exemplar_theme: String,
    signal_rewrite: String,
}

const TEMPLATE_FILES: [&str; 7] = [
    "teacher_context.txt",
    "teacher_theme.txt",
    "aspect_context.txt",
    "aspect_theme.txt",
    "exemplar_context.txt",
    "exemplar_theme.txt",
    "signal_rewrite.txt",
];

impl TemplateSet {
    /// The templates bundled with the crate.
    pub fn bundled() -> TemplateSet {
        TemplateSet {
            teacher_context: include_str!("../data/templates/teacher_context.txt").to_string(),
            teacher_theme: include_str!("../data/templates/teacher_theme.txt").to_string(),
            aspect_context: include_str!("../data/templates/aspect_context.txt").to_string(),
            aspect_theme: include_str!("../data/templates/aspect_theme.txt").to_string(),
            exemplar_context: include_str!("../data/templates/exemplar_context.txt").to_string(),
            exemplar_theme: include_str!("../data/templates/exemplar_theme.txt").to_string(),
            signal_rewrite: include_str!("../data/templates/signal_rewrite.txt").to_string(),
        }
    }

    /// Load all seven template files from a directory.
    pub fn from_dir(dir: &Path) -> Result<TemplateSet> {
        let read = |name: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(name)).map_err(|e| Error::InvalidInput(format!(
                "template `{name}` not readable under {}: {e}",
                dir.display()
            )))
        };
        let [tc, tt, ac, at, ec, et, sr] = TEMPLATE_FILES;
        Ok(TemplateSet {
            teacher_context: read(tc)?,
            teacher_theme: read(tt)?,
            aspect_context: read(ac)?,
            aspect_theme: read(at)?,
            exemplar_context: read(ec)?,
            exemplar_theme: read(et)?,
            signal_rewrite: read(sr)?,
        })
    }

    fn for_mode(&self, mode: ArtifactMode, task: TaskKind) -> &str {
        match (mode, task) {
            (ArtifactMode::Teacher, TaskKind::ContextAssisted) => &self.teacher_context,
            (ArtifactMode::Teacher, TaskKind::ThemeWord) => &self.teacher_theme,
            (ArtifactMode::Aspect, TaskKind::ContextAssisted) => &self.aspect_context,
            (ArtifactMode::Aspect, TaskKind::ThemeWord) => &self.aspect_theme,
            (ArtifactMode::Exemplar, TaskKind::ContextAssisted) => &self.exemplar_context,
            (ArtifactMode::Exemplar, TaskKind::ThemeWord) => &self.exemplar_theme,
            (ArtifactMode::Signal, _) => &self.signal_rewrite,
        }
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::bundled()
    }
}

/// Replace `{{name}}` placeholders; unknown placeholders are left intact.
fn fill(template: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = template.trim_end().to_string();
    for (name, value) in values {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}

fn base_values(spec: &TargetSpec, standard: &Standard) -> BTreeMap<&'static str, String> {
    let mut values = BTreeMap::new();
    values.insert("level", spec.level.as_str().to_string());
    values.insert("standard_name", standard.name.clone());
    match spec.task {
        TaskKind::ContextAssisted => values.insert("context", spec.payload.clone()),
        TaskKind::ThemeWord => values.insert("theme", spec.payload.clone()),
    };
    values
}

/// The baseline prompt: names only the level and the task payload.
pub fn build_teacher_prompt(
    spec: &TargetSpec,
    standard: &Standard,
    templates: &TemplateSet,
) -> Result<PromptArtifact> {
    standard.level_index(&spec.level)?;
    let text = fill(
        templates.for_mode(ArtifactMode::Teacher, spec.task),
        &base_values(spec, standard),
    );
    Ok(PromptArtifact {
        mode: ArtifactMode::Teacher,
        text,
        provenance: Vec::new(),
    })
}

/// Teacher prompt plus one labeled criterion line per aspect descriptor of
/// the target level.
pub fn build_aspect_prompt(
    spec: &TargetSpec,
    standard: &Standard,
    templates: &TemplateSet,
) -> Result<PromptArtifact> {
    let level_spec = standard.lookup(&spec.level)?;
    if level_spec.descriptors.is_empty() {
        return Err(Error::Schema {
            context: standard.id.clone(),
            message: "standard has no aspects to inject".to_string(),
        });
    }
    let mut provenance = Vec::new();
    let criteria: Vec<String> = level_spec
        .descriptors
        .iter()
        .map(|(aspect, descriptor)| {
            provenance.push((format!("aspect:{}", aspect.id), (*descriptor).to_string()));
            format!("- {}: {}", aspect.name, descriptor)
        })
        .collect();
    let mut values = base_values(spec, standard);
    values.insert("criteria_block", criteria.join("\n"));
    let text = fill(templates.for_mode(ArtifactMode::Aspect, spec.task), &values);
    Ok(PromptArtifact {
        mode: ArtifactMode::Aspect,
        text,
        provenance,
    })
}

/// Teacher prompt plus the target level's exemplar citations.
pub fn build_exemplar_prompt(
    spec: &TargetSpec,
    standard: &Standard,
    templates: &TemplateSet,
) -> Result<PromptArtifact> {
    let level_spec = standard.lookup(&spec.level)?;
    if level_spec.exemplars.is_empty() {
        return Err(Error::NoExemplars(spec.level.as_str().to_string()));
    }
    let mut provenance = Vec::new();
    let citations: Vec<String> = level_spec
        .exemplars
        .iter()
        .map(|exemplar| {
            let citation = exemplar.citation();
            provenance.push((format!("exemplar:{}", spec.level), citation.clone()));
            citation
        })
        .collect();
    let mut values = base_values(spec, standard);
    values.insert("exemplar_block", citations.join(", "));
    let text = fill(templates.for_mode(ArtifactMode::Exemplar, spec.task), &values);
    Ok(PromptArtifact {
        mode: ArtifactMode::Exemplar,
        text,
        provenance,
    })
}

/// One directive per profile flag, comparing `current` against the gold
/// statistics of `level`. Directives follow the profile's flag order.
pub fn make_directives(
    current: &FeatureVector,
    profile: &GoldProfile,
    level: &LevelId,
) -> Result<Vec<SignalDirective>> {
    let stats = profile.level(level)?;
    let mut directives = Vec::with_capacity(profile.flags.len());
    for &flag in &profile.flags {
        let value = current.get(flag)?;
        let target_mean = stats.mean[&flag];
        let target_std = stats.std[&flag];
        directives.push(SignalDirective {
            flag,
            current: value,
            target_mean,
            target_std,
            direction: direction_for(value, target_mean, target_std),
        });
    }
    Ok(directives)
}

/// Render directives as natural-language instructions.
///
/// Non-hold directives become one imperative clause each, keyed by the
/// words "increase"/"decrease"; hold directives become "keep ... unchanged"
/// clauses. When every directive holds, a single summary line is produced.
pub fn verbalize(directives: &[SignalDirective]) -> Result<String> {
    if directives.is_empty() {
        return Err(Error::InvalidInput(
            "cannot verbalize an empty directive list".to_string(),
        ));
    }
    if directives.iter().all(|d| d.direction == Direction::Hold) {
        return Ok("Keep all measured properties unchanged.".to_string());
    }
    let clauses: Vec<String> = directives
        .iter()
        .map(|d| match d.direction {
            Direction::Increase => format!(
                "Increase the {} of the story from {:.2} toward {:.2}.",
                d.flag.human_name(),
                d.current,
                d.target_mean
            ),
            Direction::Decrease => format!(
                "Decrease the {} of the story from {:.2} toward {:.2}.",
                d.flag.human_name(),
                d.current,
                d.target_mean
            ),
            Direction::Hold => format!(
                "Keep the {} of the story unchanged.",
                d.flag.human_name()
            ),
        })
        .collect();
    Ok(clauses.join("\n"))
}

/// The rewrite prompt: preamble, verbalized directives, then the full
/// current story verbatim.
pub fn build_rewrite_prompt(
    story: &str,
    directives: &[SignalDirective],
    templates: &TemplateSet,
) -> Result<PromptArtifact> {
    if story.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let directive_block = verbalize(directives)?;
    let provenance = directives
        .iter()
        .map(|d| {
            (
                format!("directive:{}", d.flag),
                format!("{:?} {:.2} -> {:.2}", d.direction, d.current, d.target_mean),
            )
        })
        .collect();
    let mut values = BTreeMap::new();
    values.insert("directive_block", directive_block);
    values.insert("story", story.to_string());
    let text = fill(&templates.signal_rewrite, &values);
    Ok(PromptArtifact {
        mode: ArtifactMode::Signal,
        text,
        provenance,
    })
}

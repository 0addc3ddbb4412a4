//! Deterministic extraction of a structured target specification from a
//! natural-language prompt.
//!
//! Matching is rule-based: case-insensitive whole-word scanning against the
//! alias tables carried by each standard, plus a `grade N(-M)` rule that maps
//! numeric grades onto grade-band levels. Ambiguity is an error, never a
//! guess — routing a request to the wrong level silently would defeat the
//! point of aligning to a standard.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::standard::{LevelId, Registry, Standard};

/// Marker introducing a context-assisted payload in canonical prompts.
pub const CONTEXT_MARKER: &str = "CONTEXT:";
/// Marker introducing a theme-word payload in canonical prompts.
pub const THEME_MARKER: &str = "THEME:";

/// The two supported generation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    /// Continue a story from a 50-70 word context paragraph.
    #[serde(rename = "context-assisted")]
    ContextAssisted,
    /// Write a story from scratch around a single theme word.
    #[serde(rename = "theme-word")]
    ThemeWord,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::ContextAssisted => f.write_str("context-assisted"),
            TaskKind::ThemeWord => f.write_str("theme-word"),
        }
    }
}

/// A fully resolved generation target: which standard, which level, which
/// task, and the task payload (context text or theme word).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub standard_id: String,
    pub level: LevelId,
    pub task: TaskKind,
    pub payload: String,
}

/// Build a [`TargetSpec`] directly, enforcing the same invariants as
/// [`extract`].
pub fn make_spec(
    registry: &Registry,
    standard_id: &str,
    level: &str,
    task: TaskKind,
    payload: &str,
) -> Result<TargetSpec> {
    let standard = registry.require(standard_id)?;
    let level = LevelId::from(level);
    standard.level_index(&level)?;
    let payload = payload.trim();
    if payload.is_empty() {
        return Err(Error::InvalidInput(format!(
            "empty payload for {task} task"
        )));
    }
    if task == TaskKind::ThemeWord && payload.split_whitespace().count() != 1 {
        return Err(Error::InvalidInput(format!(
            "theme payload must be a single token, got `{payload}`"
        )));
    }
    Ok(TargetSpec {
        standard_id: standard.id.clone(),
        level,
        task,
        payload: payload.to_string(),
    })
}

/// Render the canonical prompt for a spec. `extract(render(spec))` returns
/// the same spec for every valid spec.
pub fn render(spec: &TargetSpec, registry: &Registry) -> Result<String> {
    let standard = registry.require(&spec.standard_id)?;
    let marker = match spec.task {
        TaskKind::ContextAssisted => CONTEXT_MARKER,
        TaskKind::ThemeWord => THEME_MARKER,
    };
    Ok(format!(
        "Write a story for {} readers on the {} scale.\n\n{marker} {}",
        spec.level, standard.name, spec.payload
    ))
}

/// Parse a natural-language prompt into a [`TargetSpec`].
///
/// The standard is identified by alias scan; when no standard alias appears
/// but the matched level tokens all belong to one standard, that standard is
/// inferred. Task and payload come from `CONTEXT:`/`THEME:` markers, falling
/// back to a quoted theme word.
pub fn extract(prompt: &str, registry: &Registry) -> Result<TargetSpec> {
    if registry.is_empty() {
        return Err(Error::NoStandardFound);
    }
    // Only the head of the prompt (before any payload marker) is scanned for
    // standard/level tags so that context text cannot leak spurious matches.
    let head = prompt
        .find(CONTEXT_MARKER)
        .or_else(|| prompt.find(THEME_MARKER))
        .map_or(prompt, |i| &prompt[..i]);

    let standard = resolve_standard(head, registry)?;
    let level = resolve_level(head, standard)?;
    let (task, payload) = extract_payload(prompt)?;

    make_spec(registry, &standard.id, level.as_str(), task, &payload)
}

fn resolve_standard<'r>(head: &str, registry: &'r Registry) -> Result<&'r Standard> {
    let mut matched: Vec<&Standard> = registry
        .standards()
        .iter()
        .filter(|s| {
            s.standard_aliases()
                .iter()
                .any(|alias| contains_word(head, alias))
        })
        .collect();
    if matched.is_empty() {
        // fall back: infer from level tokens when they all point one way
        matched = registry
            .standards()
            .iter()
            .filter(|s| !level_matches(head, s).is_empty())
            .collect();
    }
    match matched.len() {
        0 => Err(Error::NoStandardFound),
        1 => Ok(matched[0]),
        _ => Err(Error::Ambiguous {
            what: "standard".to_string(),
            candidates: matched.iter().map(|s| s.id.clone()).collect(),
        }),
    }
}

fn resolve_level(head: &str, standard: &Standard) -> Result<LevelId> {
    let matched = level_matches(head, standard);
    match matched.len() {
        0 => Err(Error::NoLevelFound {
            standard: standard.id.clone(),
        }),
        1 => Ok(matched[0].clone()),
        _ => Err(Error::Ambiguous {
            what: "level".to_string(),
            candidates: matched.iter().map(|l| l.as_str().to_string()).collect(),
        }),
    }
}

/// Distinct levels of `standard` mentioned in `head`, in scale order.
fn level_matches(head: &str, standard: &Standard) -> Vec<LevelId> {
    let mut found: Vec<LevelId> = standard
        .levels
        .iter()
        .filter(|level| {
            standard
                .level_aliases(level)
                .iter()
                .any(|alias| contains_word(head, alias))
        })
        .cloned()
        .collect();
    for level in grade_rule_matches(head, standard) {
        if !found.contains(&level) {
            found.push(level);
        }
    }
    // keep scale order
    found.sort_by_key(|l| standard.level_index(l).unwrap_or(usize::MAX));
    found
}

static GRADE_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bgrades?\s*(\d{1,2})(?:\s*-\s*(\d{1,2}))?\b").unwrap()
});
static BAND_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^grade(\d{1,2})-(\d{1,2})$").unwrap());

/// `grade N` / `grades N-M` forms map onto levels whose id encodes a grade
/// band (`grade<lo>-<hi>`): the band containing each mentioned grade.
fn grade_rule_matches(head: &str, standard: &Standard) -> Vec<LevelId> {
    let bands: Vec<(LevelId, u32, u32)> = standard
        .levels
        .iter()
        .filter_map(|level| {
            let caps = BAND_PATTERN.captures(level.as_str())?;
            let lo: u32 = caps[1].parse().ok()?;
            let hi: u32 = caps[2].parse().ok()?;
            Some((level.clone(), lo, hi))
        })
        .collect();
    if bands.is_empty() {
        return Vec::new();
    }
    let mut matched = Vec::new();
    for caps in GRADE_PATTERN.captures_iter(head) {
        let lo: u32 = caps[1].parse().unwrap_or(0);
        let hi: u32 = caps
            .get(2)
            .and_then(|m| m.as_str().parse().ok())
            .unwrap_or(lo);
        for grade in [lo, hi] {
            for (level, blo, bhi) in &bands {
                if grade >= *blo && grade <= *bhi && !matched.contains(level) {
                    matched.push(level.clone());
                }
            }
        }
    }
    matched
}

/// Case-insensitive whole-word containment: the alias must be bounded by
/// non-alphanumeric characters (or string edges) on both sides.
fn contains_word(text: &str, alias: &str) -> bool {
    let alias = alias.trim();
    if alias.is_empty() {
        return false;
    }
    let text_lower = text.to_lowercase();
    let alias_lower = alias.to_lowercase();
    let mut from = 0;
    while let Some(pos) = text_lower[from..].find(&alias_lower) {
        let start = from + pos;
        let end = start + alias_lower.len();
        let before_ok = start == 0
            || !text_lower[..start]
                .chars()
                .next_back()
                .is_some_and(char::is_alphanumeric);
        let after_ok = end == text_lower.len()
            || !text_lower[end..].chars().next().is_some_and(char::is_alphanumeric);
        if before_ok && after_ok {
            return true;
        }
        from = start + alias_lower.chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// Locate the task payload: marker first, then a quoted single token.
fn extract_payload(prompt: &str) -> Result<(TaskKind, String)> {
    let context_at = prompt.find(CONTEXT_MARKER);
    let theme_at = prompt.find(THEME_MARKER);
    match (context_at, theme_at) {
        (Some(_), Some(_)) => Err(Error::Ambiguous {
            what: "task".to_string(),
            candidates: vec!["context-assisted".to_string(), "theme-word".to_string()],
        }),
        (Some(i), None) => {
            let payload = prompt[i + CONTEXT_MARKER.len()..].trim();
            if payload.is_empty() {
                return Err(Error::MissingPayload);
            }
            Ok((TaskKind::ContextAssisted, payload.to_string()))
        }
        (None, Some(i)) => {
            let payload = prompt[i + THEME_MARKER.len()..]
                .split_whitespace()
                .next()
                .map(trim_token)
                .unwrap_or_default();
            if payload.is_empty() {
                return Err(Error::MissingPayload);
            }
            Ok((TaskKind::ThemeWord, payload))
        }
        (None, None) => match quoted_theme(prompt) {
            Some(theme) => Ok((TaskKind::ThemeWord, theme)),
            None => Err(Error::MissingPayload),
        },
    }
}

fn trim_token(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

/// First quoted span that holds exactly one token.
fn quoted_theme(prompt: &str) -> Option<String> {
    for quote in ['"', '\u{201c}', '\''] {
        let close = match quote {
            '\u{201c}' => '\u{201d}',
            q => q,
        };
        let mut rest = prompt;
        while let Some(start) = rest.find(quote) {
            let after = &rest[start + quote.len_utf8()..];
            if let Some(end) = after.find(close) {
                let inner = &after[..end];
                let mut words = inner.split_whitespace();
                if let (Some(word), None) = (words.next(), words.next()) {
                    let token = trim_token(word);
                    if !token.is_empty() {
                        return Some(token);
                    }
                }
                rest = &after[end + close.len_utf8()..];
            } else {
                break;
            }
        }
    }
    None
}

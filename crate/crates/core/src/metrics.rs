//! Linguistic flags computed from raw text.
//!
//! Everything here is deterministic and dependency-free: rule-based sentence
//! segmentation with a fixed abbreviation list, whitespace/punctuation
//! tokenization that keeps internal apostrophes and hyphens, and the flag
//! computations built on top (readability, type-token ratios, length
//! statistics, conjunction densities, age-of-acquisition, entity and proper
//! noun densities).
//!
//! Entity recognition is a capitalization heuristic with a promotion rule for
//! sentence-initial tokens, not a trained NER model; it approximates entity
//! density well enough for profile comparisons while staying reproducible.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUBORDINATING_LIST: &str = include_str!("../data/subordinating_conjunctions.txt");
const ABBREVIATIONS_LIST: &str = include_str!("../data/abbreviations.txt");

/// Coordinating conjunctions counted by [`conjunction_density`].
pub const COORDINATING_CONJUNCTIONS: [&str; 7] = ["and", "but", "or", "nor", "for", "so", "yet"];

static SUBORDINATING: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    SUBORDINATING_LIST
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

static ABBREVIATIONS: LazyLock<HashSet<String>> = LazyLock::new(|| {
    ABBREVIATIONS_LIST
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
});

/// Identifier of a linguistic flag.
///
/// The set is fixed: these are the measurable features that standards may
/// bind to their aspects. Serialized names are the snake_case strings used
/// in standard files, gold profiles, and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagId {
    Ari,
    Ttr,
    RootTtr,
    TotalSentences,
    TotalWords,
    AvgSentenceLength,
    AvgWordLength,
    CoordinatingConjunctionDensity,
    SubordinatingConjunctionDensity,
    AoaMean,
    AoaCoverage,
    EntityDensity,
    ProperNounDensity,
}

impl FlagId {
    /// Every supported flag, in canonical order.
    pub const ALL: [FlagId; 13] = [
        FlagId::Ari,
        FlagId::Ttr,
        FlagId::RootTtr,
        FlagId::TotalSentences,
        FlagId::TotalWords,
        FlagId::AvgSentenceLength,
        FlagId::AvgWordLength,
        FlagId::CoordinatingConjunctionDensity,
        FlagId::SubordinatingConjunctionDensity,
        FlagId::AoaMean,
        FlagId::AoaCoverage,
        FlagId::EntityDensity,
        FlagId::ProperNounDensity,
    ];

    /// The snake_case identifier used in data files and reports.
    pub fn name(self) -> &'static str {
        match self {
            FlagId::Ari => "ari",
            FlagId::Ttr => "ttr",
            FlagId::RootTtr => "root_ttr",
            FlagId::TotalSentences => "total_sentences",
            FlagId::TotalWords => "total_words",
            FlagId::AvgSentenceLength => "avg_sentence_length",
            FlagId::AvgWordLength => "avg_word_length",
            FlagId::CoordinatingConjunctionDensity => "coordinating_conjunction_density",
            FlagId::SubordinatingConjunctionDensity => "subordinating_conjunction_density",
            FlagId::AoaMean => "aoa_mean",
            FlagId::AoaCoverage => "aoa_coverage",
            FlagId::EntityDensity => "entity_density",
            FlagId::ProperNounDensity => "proper_noun_density",
        }
    }

    /// Human-readable name used by the verbalizer when rendering directives.
    pub fn human_name(self) -> &'static str {
        match self {
            FlagId::Ari => "readability grade (automated readability index)",
            FlagId::Ttr => "vocabulary diversity (simple type-token ratio)",
            FlagId::RootTtr => "vocabulary diversity (type-token ratio)",
            FlagId::TotalSentences => "total sentence count",
            FlagId::TotalWords => "total word count",
            FlagId::AvgSentenceLength => "average sentence length",
            FlagId::AvgWordLength => "average word length",
            FlagId::CoordinatingConjunctionDensity => "coordinating conjunction density",
            FlagId::SubordinatingConjunctionDensity => "subordinating conjunction density",
            FlagId::AoaMean => "average age of acquisition of the vocabulary",
            FlagId::AoaCoverage => "age-of-acquisition lexicon coverage",
            FlagId::EntityDensity => "named entity density per sentence",
            FlagId::ProperNounDensity => "proper noun density",
        }
    }

    /// Reverse lookup of [`FlagId::human_name`], used by tooling that parses
    /// verbalized directives back into flags.
    pub fn from_human_name(name: &str) -> Option<FlagId> {
        FlagId::ALL.iter().copied().find(|f| f.human_name() == name)
    }

    /// Comma-separated list of all supported flag names, for diagnostics.
    pub fn supported_names() -> String {
        FlagId::ALL
            .iter()
            .map(|f| f.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for FlagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FlagId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FlagId::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFlag(s.to_string()))
    }
}

/// Sentence-segmented, tokenized text.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedText {
    /// Sentences in order, each a list of tokens. Never empty; every
    /// sentence holds at least one token.
    pub sentences: Vec<Vec<String>>,
    /// The original input.
    pub raw: String,
}

impl TokenizedText {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    /// All tokens in reading order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    /// Alphanumeric characters summed over all tokens. Internal apostrophes
    /// and hyphens survive tokenization but are not counted as characters.
    pub fn alnum_chars(&self) -> usize {
        self.tokens()
            .map(|t| t.chars().filter(|c| c.is_alphanumeric()).count())
            .sum()
    }
}

/// Named flag values computed from one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Flag values, keyed by flag id. Exactly the requested flags.
    pub values: BTreeMap<FlagId, f64>,
    pub token_count: usize,
    pub sentence_count: usize,
}

impl FeatureVector {
    /// Value for `flag`, or a missing-flag error.
    pub fn get(&self, flag: FlagId) -> Result<f64> {
        self.values
            .get(&flag)
            .copied()
            .ok_or_else(|| Error::MissingFlag(flag.name().to_string()))
    }
}

/// Age-of-acquisition lexicon: lowercase word -> acquisition age in years.
#[derive(Debug, Clone)]
pub struct AoaLexicon {
    entries: BTreeMap<String, f64>,
    /// Where the entries came from (file path or a descriptive tag).
    pub source: String,
}

impl AoaLexicon {
    /// Build from (word, age) pairs. Words are case-folded.
    pub fn from_entries<I, S>(entries: I, source: &str) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut map = BTreeMap::new();
        for (word, age) in entries {
            if !(age > 0.0 && age < 25.0) {
                return Err(Error::Schema {
                    context: source.to_string(),
                    message: format!(
                        "age {age} for `{}` outside (0, 25)",
                        word.as_ref()
                    ),
                });
            }
            map.insert(word.as_ref().to_lowercase(), age);
        }
        if map.is_empty() {
            return Err(Error::Schema {
                context: source.to_string(),
                message: "lexicon has no entries".to_string(),
            });
        }
        Ok(AoaLexicon {
            entries: map,
            source: source.to_string(),
        })
    }

    /// Load a two-column TSV (word<TAB>age). `#` lines are comments.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (word, age) = match (cols.next(), cols.next()) {
                (Some(w), Some(a)) => (w.trim(), a.trim()),
                _ => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        message: format!("line {}: expected word<TAB>age", lineno + 1),
                    })
                }
            };
            let age: f64 = age.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                message: format!("line {}: age `{age}` is not a number", lineno + 1),
            })?;
            pairs.push((word.to_string(), age));
        }
        AoaLexicon::from_entries(pairs, &path.display().to_string())
    }

    /// The bundled demonstration lexicon (small, synthetic norms).
    pub fn bundled() -> Self {
        static BUNDLED: &str = include_str!("../data/aoa_lexicon.tsv");
        let pairs = BUNDLED
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let mut cols = l.split('\t');
                let word = cols.next()?;
                let age: f64 = cols.next()?.trim().parse().ok()?;
                Some((word.to_string(), age))
            });
        AoaLexicon::from_entries(pairs, "bundled").expect("bundled lexicon is valid")
    }

    pub fn lookup(&self, word: &str) -> Option<f64> {
        self.entries.get(&word.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Split text into sentences and tokens.
///
/// Sentences end at runs of `.`/`!`/`?`, except when a `.` terminates a
/// known abbreviation or sits between two digits. Tokens are runs of
/// alphanumeric characters; an apostrophe or hyphen stays inside a token
/// when flanked by alphanumerics on both sides. Sentences that carry no
/// tokens are dropped; input with no tokens at all is an error.
pub fn segment(text: &str) -> Result<TokenizedText> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if c == '!' || c == '?' || (c == '.' && is_sentence_period(&chars, i)) {
            // absorb a run of terminal punctuation
            let mut end = i;
            while end + 1 < chars.len() && matches!(chars[end + 1], '.' | '!' | '?') {
                end += 1;
            }
            let sentence: String = chars[start..=end].iter().collect();
            let tokens = tokenize(&sentence);
            if !tokens.is_empty() {
                sentences.push(tokens);
            }
            start = end + 1;
            i = end + 1;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        let tokens = tokenize(&tail);
        if !tokens.is_empty() {
            sentences.push(tokens);
        }
    }
    if sentences.is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(TokenizedText {
        sentences,
        raw: text.to_string(),
    })
}

/// True when the period at `idx` ends a sentence: not an abbreviation from
/// the fixed list, not a decimal point. Ties break toward not splitting.
fn is_sentence_period(chars: &[char], idx: usize) -> bool {
    // decimal point
    if idx > 0
        && idx + 1 < chars.len()
        && chars[idx - 1].is_ascii_digit()
        && chars[idx + 1].is_ascii_digit()
    {
        return false;
    }
    // word immediately before the period, including it: "Dr.", "e.g."
    let mut w = idx;
    while w > 0 && !chars[w - 1].is_whitespace() {
        w -= 1;
    }
    let word: String = chars[w..=idx].iter().collect();
    !ABBREVIATIONS.contains(&word.to_lowercase())
}

/// Tokenize one sentence: alphanumerics form tokens; `'` and `-` join a
/// token only between alphanumerics.
fn tokenize(sentence: &str) -> Vec<String> {
    let chars: Vec<char> = sentence.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let keep = c.is_alphanumeric()
            || ((c == '\'' || c == '-')
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && i + 1 < chars.len()
                && chars[i + 1].is_alphanumeric());
        if keep {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Simple type-token ratio: distinct lowercase tokens / total tokens.
pub fn ttr(t: &TokenizedText) -> f64 {
    let total = t.token_count();
    let types: HashSet<String> = t.tokens().map(|w| w.to_lowercase()).collect();
    types.len() as f64 / total as f64
}

/// Root type-token ratio: distinct lowercase tokens / sqrt(total tokens).
pub fn root_ttr(t: &TokenizedText) -> f64 {
    let total = t.token_count();
    let types: HashSet<String> = t.tokens().map(|w| w.to_lowercase()).collect();
    types.len() as f64 / (total as f64).sqrt()
}

/// Automated Readability Index over alphanumeric characters:
/// `4.71 * chars/words + 0.5 * words/sentences - 21.43`.
pub fn ari(t: &TokenizedText) -> f64 {
    let chars = t.alnum_chars() as f64;
    let words = t.token_count() as f64;
    let sentences = t.sentence_count() as f64;
    4.71 * (chars / words) + 0.5 * (words / sentences) - 21.43
}

/// Totals and averages of sentence and word lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub total_sentences: usize,
    pub total_words: usize,
    pub avg_sentence_length: f64,
    pub avg_word_length: f64,
}

pub fn length_stats(t: &TokenizedText) -> LengthStats {
    let sentences = t.sentence_count();
    let words = t.token_count();
    LengthStats {
        total_sentences: sentences,
        total_words: words,
        avg_sentence_length: words as f64 / sentences as f64,
        avg_word_length: t.alnum_chars() as f64 / words as f64,
    }
}

/// Which conjunction list [`conjunction_density`] counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjunctionKind {
    Coordinating,
    Subordinating,
}

/// Conjunctions of `kind` per sentence.
pub fn conjunction_density(t: &TokenizedText, kind: ConjunctionKind) -> f64 {
    let count = t
        .tokens()
        .map(|w| w.to_lowercase())
        .filter(|w| match kind {
            ConjunctionKind::Coordinating => COORDINATING_CONJUNCTIONS.contains(&w.as_str()),
            ConjunctionKind::Subordinating => SUBORDINATING.contains(w.as_str()),
        })
        .count();
    count as f64 / t.sentence_count() as f64
}

/// Mean acquisition age of covered tokens plus lexicon coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoaDensity {
    /// Average lexicon age over covered tokens; 0 when nothing is covered.
    pub mean_aoa: f64,
    /// Covered tokens / total tokens.
    pub coverage: f64,
}

pub fn aoa_density(t: &TokenizedText, lexicon: &AoaLexicon) -> AoaDensity {
    let total = t.token_count();
    let mut hits = 0usize;
    let mut sum = 0.0f64;
    for token in t.tokens() {
        if let Some(age) = lexicon.lookup(token) {
            hits += 1;
            sum += age;
        }
    }
    if hits == 0 {
        AoaDensity {
            mean_aoa: 0.0,
            coverage: 0.0,
        }
    } else {
        AoaDensity {
            mean_aoa: sum / hits as f64,
            coverage: hits as f64 / total as f64,
        }
    }
}

/// Marks each token position that the entity heuristic accepts:
/// (a) capitalized and not sentence-initial, or (b) sentence-initial,
/// capitalized, and occurring capitalized mid-sentence elsewhere in the text.
fn entity_token_mask(t: &TokenizedText) -> Vec<Vec<bool>> {
    let is_cap = |w: &str| w.chars().next().is_some_and(char::is_uppercase);
    let mid_caps: HashSet<&str> = t
        .sentences
        .iter()
        .flat_map(|s| s.iter().skip(1))
        .filter(|w| is_cap(w))
        .map(String::as_str)
        .collect();
    t.sentences
        .iter()
        .map(|sentence| {
            sentence
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    is_cap(w) && (i > 0 || mid_caps.contains(w.as_str()))
                })
                .collect()
        })
        .collect()
}

/// Entities per sentence; consecutive entity tokens merge into one entity.
pub fn entity_density(t: &TokenizedText) -> f64 {
    let mask = entity_token_mask(t);
    let mut entities = 0usize;
    for sentence in &mask {
        let mut in_entity = false;
        for &m in sentence {
            if m && !in_entity {
                entities += 1;
            }
            in_entity = m;
        }
    }
    entities as f64 / t.sentence_count() as f64
}

/// Entity tokens (before merging) per token.
pub fn proper_noun_density(t: &TokenizedText) -> f64 {
    let mask = entity_token_mask(t);
    let hits: usize = mask
        .iter()
        .map(|s| s.iter().filter(|&&m| m).count())
        .sum();
    hits as f64 / t.token_count() as f64
}

/// Compute the requested flags from `text` in one segmentation pass.
///
/// The result's `values` map contains exactly `flags` (duplicates collapse).
pub fn extract_profile(text: &str, flags: &[FlagId], lexicon: &AoaLexicon) -> Result<FeatureVector> {
    let t = segment(text)?;
    Ok(profile_of(&t, flags, lexicon))
}

/// Same as [`extract_profile`] but over an already-segmented text.
pub fn profile_of(t: &TokenizedText, flags: &[FlagId], lexicon: &AoaLexicon) -> FeatureVector {
    let mut values = BTreeMap::new();
    let mut aoa: Option<AoaDensity> = None;
    let mut lengths: Option<LengthStats> = None;
    for &flag in flags {
        let value = match flag {
            FlagId::Ari => ari(t),
            FlagId::Ttr => ttr(t),
            FlagId::RootTtr => root_ttr(t),
            FlagId::TotalSentences => t.sentence_count() as f64,
            FlagId::TotalWords => t.token_count() as f64,
            FlagId::AvgSentenceLength => {
                lengths.get_or_insert_with(|| length_stats(t)).avg_sentence_length
            }
            FlagId::AvgWordLength => {
                lengths.get_or_insert_with(|| length_stats(t)).avg_word_length
            }
            FlagId::CoordinatingConjunctionDensity => {
                conjunction_density(t, ConjunctionKind::Coordinating)
            }
            FlagId::SubordinatingConjunctionDensity => {
                conjunction_density(t, ConjunctionKind::Subordinating)
            }
            FlagId::AoaMean => aoa.get_or_insert_with(|| aoa_density(t, lexicon)).mean_aoa,
            FlagId::AoaCoverage => aoa.get_or_insert_with(|| aoa_density(t, lexicon)).coverage,
            FlagId::EntityDensity => entity_density(t),
            FlagId::ProperNounDensity => proper_noun_density(t),
        };
        values.insert(flag, value);
    }
    FeatureVector {
        values,
        token_count: t.token_count(),
        sentence_count: t.sentence_count(),
    }
}

//! Gold-corpus ingestion and per-level feature profiles.
//!
//! A [`GoldProfile`] holds the per-level mean and population standard
//! deviation of each requested flag over a labeled corpus. Profiles are
//! persisted as JSON so generation runs need no corpus access; gated corpora
//! stay with their owners.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{extract_profile, segment, length_stats, AoaLexicon, FlagId};
use crate::standard::{LevelId, Standard};

/// One labeled text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub level: LevelId,
    pub text: String,
    pub source_id: String,
}

/// A level-labeled text corpus tied to one standard.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub standard_id: String,
    pub items: Vec<CorpusItem>,
}

impl LabeledCorpus {
    /// Items for a level, in corpus order.
    pub fn items_for(&self, level: &LevelId) -> Vec<&CorpusItem> {
        self.items.iter().filter(|i| &i.level == level).collect()
    }

    /// Distinct levels present, in standard scale order.
    pub fn levels_present(&self, standard: &Standard) -> Vec<LevelId> {
        standard
            .levels
            .iter()
            .filter(|l| self.items.iter().any(|i| &i.level == *l))
            .cloned()
            .collect()
    }
}

/// Load a corpus from a JSONL file (one `{level, text, source_id}` object
/// per line) or from a directory of per-level subdirectories of `.txt`
/// files. Levels are validated against `standard`; empty texts are
/// rejected.
pub fn load_corpus(path: &Path, standard: &Standard) -> Result<LabeledCorpus> {
    let meta = std::fs::metadata(path).map_err(|_| {
        Error::InvalidInput(format!("corpus not found: {}", path.display()))
    })?;
    let items = if meta.is_dir() {
        load_corpus_dir(path)?
    } else {
        load_corpus_jsonl(path)?
    };
    if items.is_empty() {
        return Err(Error::InvalidInput(format!(
            "corpus at {} has no items",
            path.display()
        )));
    }
    for item in &items {
        if !standard.has_level(&item.level) {
            return Err(Error::UnknownLevel {
                standard: standard.id.clone(),
                level: item.level.as_str().to_string(),
            });
        }
        if item.text.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "corpus item `{}` has empty text",
                item.source_id
            )));
        }
    }
    Ok(LabeledCorpus {
        standard_id: standard.id.clone(),
        items,
    })
}

fn load_corpus_jsonl(path: &Path) -> Result<Vec<CorpusItem>> {
    let text = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: CorpusItem = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        items.push(item);
    }
    Ok(items)
}

fn load_corpus_dir(path: &Path) -> Result<Vec<CorpusItem>> {
    let mut items = Vec::new();
    let mut level_dirs: Vec<_> = std::fs::read_dir(path)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().is_dir())
        .collect();
    level_dirs.sort_by_key(|e| e.file_name());
    for dir in level_dirs {
        let level = LevelId(dir.file_name().to_string_lossy().to_string());
        let mut files: Vec<_> = std::fs::read_dir(dir.path())?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        files.sort();
        for file in files {
            let text = std::fs::read_to_string(&file)?;
            let source_id = file
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            items.push(CorpusItem {
                level: level.clone(),
                text,
                source_id: format!("{level}/{source_id}"),
            });
        }
    }
    Ok(items)
}

/// Mean and population standard deviation of each flag at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelProfile {
    pub mean: BTreeMap<FlagId, f64>,
    pub std: BTreeMap<FlagId, f64>,
    pub n: usize,
}

/// Per-level flag statistics for one standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldProfile {
    pub standard_id: String,
    /// Flag order; directive rendering and reports follow it.
    pub flags: Vec<FlagId>,
    pub levels: BTreeMap<LevelId, LevelProfile>,
}

impl GoldProfile {
    /// Statistics for `level`, or an unknown-level error.
    pub fn level(&self, level: &LevelId) -> Result<&LevelProfile> {
        self.levels.get(level).ok_or_else(|| Error::UnknownLevel {
            standard: self.standard_id.clone(),
            level: level.as_str().to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        for (level, profile) in &self.levels {
            if profile.n < 2 {
                return Err(Error::InsufficientItems {
                    level: level.as_str().to_string(),
                    count: profile.n,
                });
            }
            for flag in &self.flags {
                if !profile.mean.contains_key(flag) || !profile.std.contains_key(flag) {
                    return Err(Error::Schema {
                        context: format!("profile level `{level}`"),
                        message: format!("missing flag `{flag}`"),
                    });
                }
            }
            if profile.mean.len() != self.flags.len() || profile.std.len() != self.flags.len() {
                return Err(Error::Schema {
                    context: format!("profile level `{level}`"),
                    message: "mean/std flags differ from declared flag list".to_string(),
                });
            }
            if profile.std.values().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::Schema {
                    context: format!("profile level `{level}`"),
                    message: "standard deviations must be finite and non-negative".to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Per-level arithmetic mean and population standard deviation of each flag.
/// Every level present in the corpus needs at least two items.
pub fn compute_profile(
    corpus: &LabeledCorpus,
    flags: &[FlagId],
    lexicon: &AoaLexicon,
) -> Result<GoldProfile> {
    let mut by_level: BTreeMap<LevelId, Vec<BTreeMap<FlagId, f64>>> = BTreeMap::new();
    for item in &corpus.items {
        let fv = extract_profile(&item.text, flags, lexicon)?;
        by_level.entry(item.level.clone()).or_default().push(fv.values);
    }
    let mut levels = BTreeMap::new();
    for (level, vectors) in by_level {
        if vectors.len() < 2 {
            return Err(Error::InsufficientItems {
                level: level.as_str().to_string(),
                count: vectors.len(),
            });
        }
        let n = vectors.len() as f64;
        let mut mean = BTreeMap::new();
        let mut std = BTreeMap::new();
        for &flag in flags {
            let sum: f64 = vectors.iter().map(|v| v[&flag]).sum();
            let mu = sum / n;
            let var: f64 = vectors.iter().map(|v| (v[&flag] - mu).powi(2)).sum::<f64>() / n;
            mean.insert(flag, mu);
            std.insert(flag, var.sqrt());
        }
        levels.insert(
            level,
            LevelProfile {
                mean,
                std,
                n: vectors.len(),
            },
        );
    }
    Ok(GoldProfile {
        standard_id: corpus.standard_id.clone(),
        flags: flags.to_vec(),
        levels,
    })
}

/// Per-level corpus size and average word/sentence counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusLevelStats {
    pub n: usize,
    pub avg_word_count: f64,
    pub avg_sentence_count: f64,
}

/// Average total word and sentence counts per level, keyed by level.
/// Levels with no items are simply absent.
pub fn corpus_stats(corpus: &LabeledCorpus) -> Result<BTreeMap<LevelId, CorpusLevelStats>> {
    let mut sums: BTreeMap<LevelId, (usize, f64, f64)> = BTreeMap::new();
    for item in &corpus.items {
        let t = segment(&item.text)?;
        let stats = length_stats(&t);
        let entry = sums.entry(item.level.clone()).or_insert((0, 0.0, 0.0));
        entry.0 += 1;
        entry.1 += stats.total_words as f64;
        entry.2 += stats.total_sentences as f64;
    }
    Ok(sums
        .into_iter()
        .map(|(level, (n, words, sentences))| {
            (
                level,
                CorpusLevelStats {
                    n,
                    avg_word_count: words / n as f64,
                    avg_sentence_count: sentences / n as f64,
                },
            )
        })
        .collect())
}

/// Write a profile as pretty JSON.
pub fn save_profile(profile: &GoldProfile, path: &Path) -> Result<()> {
    profile.validate()?;
    let mut text = serde_json::to_string_pretty(profile)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Load and validate a profile written by [`save_profile`].
pub fn load_profile(path: &Path) -> Result<GoldProfile> {
    let text = std::fs::read_to_string(path)?;
    let profile: GoldProfile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    profile.validate()?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::standard::Standard;

    fn lexicon() -> AoaLexicon {
        AoaLexicon::from_entries([("cat", 4.0), ("dog", 4.5)], "toy").unwrap()
    }

    fn corpus(items: &[(&str, &str)]) -> LabeledCorpus {
        LabeledCorpus {
            standard_id: "cefr".to_string(),
            items: items
                .iter()
                .enumerate()
                .map(|(i, (level, text))| CorpusItem {
                    level: LevelId::from(*level),
                    text: text.to_string(),
                    source_id: format!("t{i}"),
                })
                .collect(),
        }
    }

    #[test]
    fn mean_and_population_std_by_hand() {
        // ttr values by construction: "a a b b b" -> 2/5 = 0.4,
        // "a b c a b" -> 3/5 = 0.6; mean 0.5, population std 0.1
        let corpus = corpus(&[("A2", "a a b b b"), ("A2", "a b c a b")]);
        let profile = compute_profile(&corpus, &[FlagId::Ttr], &lexicon()).unwrap();
        let level = profile.level(&LevelId::from("A2")).unwrap();
        assert!((level.mean[&FlagId::Ttr] - 0.5).abs() < 1e-12);
        assert!((level.std[&FlagId::Ttr] - 0.1).abs() < 1e-12);
        assert_eq!(level.n, 2);
    }

    #[test]
    fn identical_items_have_zero_std() {
        let corpus = corpus(&[("B1", "the cat sat."), ("B1", "the cat sat.")]);
        let profile =
            compute_profile(&corpus, &[FlagId::Ttr, FlagId::AvgSentenceLength], &lexicon())
                .unwrap();
        let level = profile.level(&LevelId::from("B1")).unwrap();
        assert_eq!(level.std[&FlagId::Ttr], 0.0);
        assert_eq!(level.std[&FlagId::AvgSentenceLength], 0.0);
    }

    #[test]
    fn four_text_spreadsheet_oracle() {
        // Hand-computed per-text flags (ttr, avg_sentence_length):
        //   A2 "The cat sat."            -> (1.0, 3.0)
        //   A2 "the cat's mat"           -> (1.0, 3.0)
        //   B1 "I ran and he ran and she ran."        -> (0.625, 8.0)
        //   B1 "The dog and the cat run to the ball." -> (7/9, 9.0)
        // Oracle: mean/std of those numbers.
        let corpus = corpus(&[
            ("A2", "The cat sat."),
            ("A2", "the cat's mat"),
            ("B1", "I ran and he ran and she ran."),
            ("B1", "The dog and the cat run to the ball."),
        ]);
        let flags = [FlagId::Ttr, FlagId::AvgSentenceLength];
        let profile = compute_profile(&corpus, &flags, &lexicon()).unwrap();

        let a2 = profile.level(&LevelId::from("A2")).unwrap();
        assert!((a2.mean[&FlagId::Ttr] - 1.0).abs() < 1e-9);
        assert!((a2.std[&FlagId::Ttr] - 0.0).abs() < 1e-9);
        assert!((a2.mean[&FlagId::AvgSentenceLength] - 3.0).abs() < 1e-9);

        let b1 = profile.level(&LevelId::from("B1")).unwrap();
        let ttr_mean: f64 = (0.625 + 7.0 / 9.0) / 2.0;
        let ttr_std = (((0.625 - ttr_mean).powi(2) + (7.0 / 9.0 - ttr_mean).powi(2)) / 2.0)
            .sqrt();
        assert!((b1.mean[&FlagId::Ttr] - ttr_mean).abs() < 1e-9);
        assert!((b1.std[&FlagId::Ttr] - ttr_std).abs() < 1e-9);
        assert!((b1.mean[&FlagId::AvgSentenceLength] - 8.5).abs() < 1e-9);
        assert!((b1.std[&FlagId::AvgSentenceLength] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn single_item_level_is_rejected() {
        let corpus = corpus(&[("A2", "a b."), ("A2", "b c."), ("B1", "only one.")]);
        let err = compute_profile(&corpus, &[FlagId::Ttr], &lexicon()).unwrap_err();
        match err {
            Error::InsufficientItems { level, count } => {
                assert_eq!(level, "B1");
                assert_eq!(count, 1);
            }
            other => panic!("expected insufficient items, got {other}"),
        }
    }

    #[test]
    fn permutation_and_duplication_invariance() {
        let base = corpus(&[
            ("A2", "The cat sat."),
            ("A2", "a b c d."),
            ("B1", "I ran and he ran and she ran."),
            ("B1", "The dog and the cat run to the ball."),
        ]);
        let flags = [FlagId::Ttr, FlagId::Ari];
        let p1 = compute_profile(&base, &flags, &lexicon()).unwrap();

        let mut shuffled = base.clone();
        shuffled.items.reverse();
        let p2 = compute_profile(&shuffled, &flags, &lexicon()).unwrap();
        assert_eq!(p1, p2);

        let mut doubled = base.clone();
        let copy = doubled.items.clone();
        doubled.items.extend(copy);
        let p3 = compute_profile(&doubled, &flags, &lexicon()).unwrap();
        for (level, lp) in &p1.levels {
            let dp = &p3.levels[level];
            for flag in &flags {
                assert!((lp.mean[flag] - dp.mean[flag]).abs() < 1e-12);
                assert!((lp.std[flag] - dp.std[flag]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn corpus_stats_hand_average() {
        // 10-word and 20-word texts in one level -> avg 15 words
        let ten = "one two three four five six seven eight nine ten.";
        let twenty = format!("{ten} {ten}");
        let corpus = corpus(&[("A2", ten), ("A2", &twenty)]);
        let stats = corpus_stats(&corpus).unwrap();
        let a2 = &stats[&LevelId::from("A2")];
        assert_eq!(a2.n, 2);
        assert!((a2.avg_word_count - 15.0).abs() < 1e-12);
        assert!((a2.avg_sentence_count - 1.5).abs() < 1e-12);
    }

    #[test]
    fn profile_save_load_round_trip() {
        let corpus = corpus(&[
            ("A2", "The cat sat."),
            ("A2", "a b c d."),
            ("B1", "I ran and he ran and she ran."),
            ("B1", "The dog and the cat run to the ball."),
        ]);
        let flags = [FlagId::Ttr, FlagId::TotalWords];
        let profile = compute_profile(&corpus, &flags, &lexicon()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.json");
        save_profile(&profile, &path).unwrap();
        let loaded = load_profile(&path).unwrap();
        assert_eq!(profile, loaded);
    }

    #[test]
    fn truncated_profile_is_a_schema_or_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{\"standard_id\": \"cefr\", \"flags\":").unwrap();
        assert!(matches!(load_profile(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn profile_missing_flag_in_level_is_rejected() {
        let json = r#"{
          "standard_id": "cefr",
          "flags": ["ttr", "ari"],
          "levels": {
            "A2": {"mean": {"ttr": 0.5}, "std": {"ttr": 0.1}, "n": 3}
          }
        }"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing.json");
        std::fs::write(&path, json).unwrap();
        assert!(matches!(load_profile(&path), Err(Error::Schema { .. })));
    }

    #[test]
    fn load_corpus_from_directory_and_jsonl() {
        let cefr = Standard::bundled_cefr();
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("A2")).unwrap();
        std::fs::create_dir(dir.path().join("B1")).unwrap();
        std::fs::write(dir.path().join("A2/x.txt"), "The cat sat.").unwrap();
        std::fs::write(dir.path().join("B1/y.txt"), "A longer story for later.").unwrap();
        let corpus = load_corpus(dir.path(), &cefr).unwrap();
        assert_eq!(corpus.items.len(), 2);
        assert_eq!(corpus.items[0].source_id, "A2/x");

        let jsonl = dir.path().join("corpus.jsonl");
        std::fs::write(
            &jsonl,
            "{\"level\":\"A2\",\"text\":\"Hi there.\",\"source_id\":\"a\"}\n\
             {\"level\":\"C2\",\"text\":\"Dense prose.\",\"source_id\":\"b\"}\n",
        )
        .unwrap();
        let corpus = load_corpus(&jsonl, &cefr).unwrap();
        assert_eq!(corpus.items.len(), 2);
    }

    #[test]
    fn load_corpus_rejects_unknown_level() {
        let cefr = Standard::bundled_cefr();
        let dir = tempfile::tempdir().unwrap();
        let jsonl = dir.path().join("corpus.jsonl");
        std::fs::write(
            &jsonl,
            "{\"level\":\"A1\",\"text\":\"Too easy.\",\"source_id\":\"a\"}\n",
        )
        .unwrap();
        assert!(matches!(
            load_corpus(&jsonl, &cefr),
            Err(Error::UnknownLevel { .. })
        ));
    }
}

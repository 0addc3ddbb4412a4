//! Machine-readable representations of expert standards.
//!
//! A [`Standard`] carries an ordered level scale, aspects with per-level
//! descriptor text, recommended exemplars, and the linguistic flags bound to
//! each aspect. Standards load from JSON files (see the bundled `cefr.json`
//! and `ccs.json`), are validated on load, and are immutable afterwards.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FlagId;

/// Descriptor key that applies to every level of a standard.
pub const WILDCARD_LEVEL: &str = "*";

/// One level of a standard's ordered scale, e.g. `A2` or `grade4-8`.
/// Ordinal position is defined by its index in [`Standard::levels`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelId(pub String);

impl LevelId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for LevelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LevelId {
    fn from(s: &str) -> Self {
        LevelId(s.to_string())
    }
}

/// A recommended reference work for one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub title: String,
    pub author: String,
}

impl Exemplar {
    /// Rendering used in prompts and tables: `<title> by <author>`.
    pub fn citation(&self) -> String {
        format!("{} by {}", self.title, self.author)
    }
}

/// One aspect of a standard: descriptor text per level plus bound flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aspect {
    pub id: String,
    pub name: String,
    /// Keyed by level id or by [`WILDCARD_LEVEL`], which applies the same
    /// descriptor to every level (CCS aspects are not level-keyed).
    pub descriptors: BTreeMap<String, String>,
    pub flags: Vec<FlagId>,
}

impl Aspect {
    /// Descriptor text for a level, resolving the wildcard key.
    pub fn descriptor_for(&self, level: &LevelId) -> Option<&str> {
        self.descriptors
            .get(level.as_str())
            .or_else(|| self.descriptors.get(WILDCARD_LEVEL))
            .map(String::as_str)
    }
}

/// Alias tables used by prompt extraction. Optional in standard files;
/// the standard id/name and level ids always match regardless.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AliasTable {
    #[serde(default)]
    pub standard: Vec<String>,
    #[serde(default)]
    pub levels: BTreeMap<String, Vec<String>>,
}

/// A validated, immutable standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standard {
    pub id: String,
    pub name: String,
    /// Ordered lowest to highest complexity; order defines ordinality.
    pub levels: Vec<LevelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aliases: Option<AliasTable>,
    pub aspects: Vec<Aspect>,
    /// Exemplars keyed by level id (or the wildcard key).
    #[serde(default)]
    pub exemplars: BTreeMap<String, Vec<Exemplar>>,
}

/// Everything a prompt builder needs for one level: descriptor text per
/// aspect, the level's exemplars, and the union of bound flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec<'a> {
    pub standard: &'a Standard,
    pub level: LevelId,
    /// `(aspect, resolved descriptor)` in aspect order.
    pub descriptors: Vec<(&'a Aspect, &'a str)>,
    /// Exemplars for this level; possibly empty.
    pub exemplars: Vec<&'a Exemplar>,
    /// Union of the aspects' bound flags, in aspect order, deduplicated.
    pub flags: Vec<FlagId>,
}

impl Standard {
    /// Load and validate a standard-definition JSON file.
    pub fn load(path: &Path) -> Result<Standard> {
        let text = std::fs::read_to_string(path)?;
        Standard::from_json(&text, &path.display().to_string())
    }

    /// Parse and validate from a JSON string. `origin` names the source in
    /// error messages.
    pub fn from_json(text: &str, origin: &str) -> Result<Standard> {
        let standard: Standard = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        standard.validate(origin)?;
        Ok(standard)
    }

    /// Serialize to the standard-definition JSON format.
    pub fn to_json(&self) -> Result<String> {
        let mut out = serde_json::to_string_pretty(self)?;
        out.push('\n');
        Ok(out)
    }

    /// The bundled CEFR standard (levels A2..C2, three aspects).
    pub fn bundled_cefr() -> Standard {
        Standard::from_json(include_str!("../data/cefr.json"), "bundled cefr.json")
            .expect("bundled cefr.json is valid")
    }

    /// The bundled CCS standard (grade bands 4-8 and 9-12, wildcard aspects).
    pub fn bundled_ccs() -> Standard {
        Standard::from_json(include_str!("../data/ccs.json"), "bundled ccs.json")
            .expect("bundled ccs.json is valid")
    }

    fn validate(&self, origin: &str) -> Result<()> {
        let schema_err = |message: String| Error::Schema {
            context: origin.to_string(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(schema_err("field `id` is empty".into()));
        }
        if self.levels.is_empty() {
            return Err(schema_err("field `levels` is empty".into()));
        }
        for (i, level) in self.levels.iter().enumerate() {
            if level.as_str().trim().is_empty() {
                return Err(schema_err(format!("field `levels[{i}]` is empty")));
            }
            if self.levels[..i].contains(level) {
                return Err(schema_err(format!("duplicate level `{level}` in `levels`")));
            }
        }
        for aspect in &self.aspects {
            if aspect.descriptors.is_empty() {
                return Err(schema_err(format!(
                    "aspect `{}`: field `descriptors` is empty",
                    aspect.id
                )));
            }
            for key in aspect.descriptors.keys() {
                if key != WILDCARD_LEVEL && !self.has_level_key(key) {
                    return Err(schema_err(format!(
                        "aspect `{}`: descriptor key `{key}` is not in `levels`",
                        aspect.id
                    )));
                }
            }
            // lookup must be total: every level resolves to a descriptor
            for level in &self.levels {
                if aspect.descriptor_for(level).is_none() {
                    return Err(schema_err(format!(
                        "aspect `{}`: no descriptor for level `{level}` and no wildcard",
                        aspect.id
                    )));
                }
            }
            if aspect.flags.is_empty() {
                return Err(schema_err(format!(
                    "aspect `{}`: field `flags` is empty",
                    aspect.id
                )));
            }
        }
        for (key, entries) in &self.exemplars {
            if key != WILDCARD_LEVEL && !self.has_level_key(key) {
                return Err(schema_err(format!(
                    "exemplar key `{key}` is not in `levels`"
                )));
            }
            for exemplar in entries {
                if exemplar.title.trim().is_empty() {
                    return Err(schema_err(format!(
                        "exemplar under `{key}`: field `title` is empty"
                    )));
                }
            }
        }
        if let Some(aliases) = &self.aliases {
            for key in aliases.levels.keys() {
                if !self.has_level_key(key) {
                    return Err(schema_err(format!(
                        "alias key `{key}` is not in `levels`"
                    )));
                }
            }
        }
        Ok(())
    }

    fn has_level_key(&self, key: &str) -> bool {
        self.levels.iter().any(|l| l.as_str() == key)
    }

    /// Ordinal index of a level, or an unknown-level error.
    pub fn level_index(&self, level: &LevelId) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| Error::UnknownLevel {
                standard: self.id.clone(),
                level: level.as_str().to_string(),
            })
    }

    /// Whether the standard knows `level`.
    pub fn has_level(&self, level: &LevelId) -> bool {
        self.levels.contains(level)
    }

    /// Descriptor text per aspect, exemplars, and bound flags for `level`.
    pub fn lookup(&self, level: &LevelId) -> Result<LevelSpec<'_>> {
        self.level_index(level)?;
        let mut descriptors = Vec::with_capacity(self.aspects.len());
        let mut flags: Vec<FlagId> = Vec::new();
        for aspect in &self.aspects {
            let descriptor = aspect.descriptor_for(level).ok_or_else(|| Error::Schema {
                context: self.id.clone(),
                message: format!("aspect `{}` has no descriptor for `{level}`", aspect.id),
            })?;
            descriptors.push((aspect, descriptor));
            for &flag in &aspect.flags {
                if !flags.contains(&flag) {
                    flags.push(flag);
                }
            }
        }
        let mut exemplars: Vec<&Exemplar> = Vec::new();
        if let Some(list) = self.exemplars.get(level.as_str()) {
            exemplars.extend(list.iter());
        }
        if let Some(list) = self.exemplars.get(WILDCARD_LEVEL) {
            exemplars.extend(list.iter());
        }
        Ok(LevelSpec {
            standard: self,
            level: level.clone(),
            descriptors,
            exemplars,
            flags,
        })
    }

    /// `|index(a) - index(b)|` over the ordered level scale.
    pub fn level_distance(&self, a: &LevelId, b: &LevelId) -> Result<usize> {
        let ia = self.level_index(a)?;
        let ib = self.level_index(b)?;
        Ok(ia.abs_diff(ib))
    }

    /// Union of all aspects' bound flags, in aspect order, deduplicated.
    /// This is the default flag set for profiles over this standard.
    pub fn bound_flags(&self) -> Vec<FlagId> {
        let mut flags = Vec::new();
        for aspect in &self.aspects {
            for &flag in &aspect.flags {
                if !flags.contains(&flag) {
                    flags.push(flag);
                }
            }
        }
        flags
    }

    /// Aliases that identify this standard in free-form prompts.
    pub fn standard_aliases(&self) -> Vec<&str> {
        let mut out = vec![self.id.as_str(), self.name.as_str()];
        if let Some(aliases) = &self.aliases {
            out.extend(aliases.standard.iter().map(String::as_str));
        }
        out
    }

    /// Aliases that identify `level` in free-form prompts.
    pub fn level_aliases<'a>(&'a self, level: &'a LevelId) -> Vec<&'a str> {
        let mut out = vec![level.as_str()];
        if let Some(aliases) = &self.aliases {
            if let Some(list) = aliases.levels.get(level.as_str()) {
                out.extend(list.iter().map(String::as_str));
            }
        }
        out
    }
}

/// A set of loaded standards, addressable by id.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    standards: Vec<Standard>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// Registry holding the bundled CEFR and CCS standards.
    pub fn bundled() -> Registry {
        let mut registry = Registry::new();
        registry.add(Standard::bundled_cefr()).unwrap();
        registry.add(Standard::bundled_ccs()).unwrap();
        registry
    }

    pub fn add(&mut self, standard: Standard) -> Result<()> {
        if self.get(&standard.id).is_some() {
            return Err(Error::Schema {
                context: "registry".to_string(),
                message: format!("standard `{}` already registered", standard.id),
            });
        }
        self.standards.push(standard);
        Ok(())
    }

    /// Load a standard file and register it.
    pub fn add_from_file(&mut self, path: &Path) -> Result<()> {
        self.add(Standard::load(path)?)
    }

    pub fn get(&self, id: &str) -> Option<&Standard> {
        self.standards.iter().find(|s| s.id == id)
    }

    /// Like [`Registry::get`] but with an unknown-standard error.
    pub fn require(&self, id: &str) -> Result<&Standard> {
        self.get(id)
            .ok_or_else(|| Error::UnknownStandard(id.to_string()))
    }

    pub fn standards(&self) -> &[Standard] {
        &self.standards
    }

    pub fn is_empty(&self) -> bool {
        self.standards.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cefr_shape() {
        let cefr = Standard::bundled_cefr();
        assert_eq!(cefr.id, "cefr");
        assert_eq!(
            cefr.levels,
            vec![
                LevelId::from("A2"),
                LevelId::from("B1"),
                LevelId::from("B2"),
                LevelId::from("C1"),
                LevelId::from("C2")
            ]
        );
        assert_eq!(cefr.aspects.len(), 3);
    }

    #[test]
    fn bundled_ccs_shape() {
        let ccs = Standard::bundled_ccs();
        assert_eq!(ccs.id, "ccs");
        assert_eq!(
            ccs.levels,
            vec![LevelId::from("grade4-8"), LevelId::from("grade9-12")]
        );
        assert_eq!(ccs.aspects.len(), 3);
        // every CCS aspect is wildcard-keyed
        for aspect in &ccs.aspects {
            assert!(aspect.descriptors.contains_key(WILDCARD_LEVEL));
        }
    }

    #[test]
    fn lookup_resolves_descriptors_and_exemplars() {
        let cefr = Standard::bundled_cefr();
        let spec = cefr.lookup(&LevelId::from("B1")).unwrap();
        assert_eq!(spec.descriptors.len(), 3);
        assert!(spec
            .descriptors
            .iter()
            .any(|(_, d)| d.contains("can be long but not complex")));
        assert!(spec
            .exemplars
            .iter()
            .any(|e| e.citation() == "Frankenstein by Mary Shelley"));
    }

    #[test]
    fn ccs_wildcard_descriptors_are_level_independent() {
        let ccs = Standard::bundled_ccs();
        let a = ccs.lookup(&LevelId::from("grade4-8")).unwrap();
        let b = ccs.lookup(&LevelId::from("grade9-12")).unwrap();
        let da: Vec<&str> = a.descriptors.iter().map(|(_, d)| *d).collect();
        let db: Vec<&str> = b.descriptors.iter().map(|(_, d)| *d).collect();
        assert_eq!(da, db);
    }

    #[test]
    fn lookup_unknown_level() {
        let cefr = Standard::bundled_cefr();
        assert!(matches!(
            cefr.lookup(&LevelId::from("A1")),
            Err(Error::UnknownLevel { .. })
        ));
    }

    #[test]
    fn level_distance_cases() {
        let cefr = Standard::bundled_cefr();
        let d = |a: &str, b: &str| {
            cefr.level_distance(&LevelId::from(a), &LevelId::from(b))
                .unwrap()
        };
        assert_eq!(d("A2", "A2"), 0);
        assert_eq!(d("A2", "B1"), 1);
        assert_eq!(d("A2", "C2"), 4);
    }

    #[test]
    fn level_distance_is_a_metric() {
        let cefr = Standard::bundled_cefr();
        let levels = cefr.levels.clone();
        for a in &levels {
            for b in &levels {
                let dab = cefr.level_distance(a, b).unwrap();
                let dba = cefr.level_distance(b, a).unwrap();
                assert_eq!(dab, dba);
                assert_eq!(dab == 0, a == b);
                for c in &levels {
                    let dac = cefr.level_distance(a, c).unwrap();
                    let dcb = cefr.level_distance(c, b).unwrap();
                    assert!(dab <= dac + dcb);
                }
            }
        }
    }

    #[test]
    fn lookup_total_over_levels() {
        for standard in [Standard::bundled_cefr(), Standard::bundled_ccs()] {
            for level in &standard.levels {
                let spec = standard.lookup(level).unwrap();
                assert_eq!(spec.descriptors.len(), standard.aspects.len());
            }
        }
    }

    #[test]
    fn round_trip_serialize_load() {
        for standard in [Standard::bundled_cefr(), Standard::bundled_ccs()] {
            let json = standard.to_json().unwrap();
            let reloaded = Standard::from_json(&json, "round-trip").unwrap();
            assert_eq!(standard, reloaded);
        }
    }

    #[test]
    fn rejects_level_referenced_but_not_declared() {
        let mut bad = Standard::bundled_cefr();
        bad.exemplars.insert(
            "Z9".to_string(),
            vec![Exemplar {
                title: "Ghost".into(),
                author: "Nobody".into(),
            }],
        );
        let json = bad.to_json().unwrap();
        let err = Standard::from_json(&json, "bad").unwrap_err();
        match err {
            Error::Schema { message, .. } => assert!(message.contains("Z9")),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn rejects_unknown_flag_id() {
        let json = r#"{
            "id": "x", "name": "X", "levels": ["L1"],
            "aspects": [{"id": "a", "name": "A",
                         "descriptors": {"*": "d"}, "flags": ["bogus_flag"]}],
            "exemplars": {}
        }"#;
        let err = Standard::from_json(json, "inline").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn rejects_duplicate_levels() {
        let json = r#"{
            "id": "x", "name": "X", "levels": ["L1", "L1"],
            "aspects": [{"id": "a", "name": "A",
                         "descriptors": {"*": "d"}, "flags": ["ttr"]}],
            "exemplars": {}
        }"#;
        let err = Standard::from_json(json, "inline").unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }

    #[test]
    fn rejects_uncovered_level() {
        // aspect keyed only for L1 while L2 exists and no wildcard
        let json = r#"{
            "id": "x", "name": "X", "levels": ["L1", "L2"],
            "aspects": [{"id": "a", "name": "A",
                         "descriptors": {"L1": "d"}, "flags": ["ttr"]}],
            "exemplars": {}
        }"#;
        let err = Standard::from_json(json, "inline").unwrap_err();
        match err {
            Error::Schema { message, .. } => assert!(message.contains("L2")),
            other => panic!("expected schema error, got {other}"),
        }
    }
}

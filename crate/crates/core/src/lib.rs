//! Standard-aligned content generation.
//!
//! This crate encodes expert-defined educational standards (CEFR, CCS) as
//! data, parses prompts into structured target specifications, builds
//! knowledge-artifact prompts (aspect criteria, exemplars, linguistic-signal
//! rewrites), drives a pluggable LLM backend through an iterative
//! feature-guided rewrite loop, and scores generated content against
//! gold-corpus linguistic profiles.
//!
//! The pipeline, end to end:
//!
//! 1. [`extract::extract`] resolves a prompt to a standard, level, task,
//!    and payload.
//! 2. [`standard::Standard::lookup`] retrieves descriptors, exemplars, and
//!    bound flags for the target level.
//! 3. [`artifact`] renders one of the four prompt styles.
//! 4. [`orchestrator::Orchestrator::run`] calls the backend; signal mode
//!    loops measure -> directives -> rewrite until convergence.
//! 5. [`eval::evaluate`] classifies, measures distances and diversity, and
//!    emits reports.

pub mod artifact;
pub mod backend;
pub mod cli;
pub mod error;
pub mod eval;
pub mod extract;
pub mod metrics;
pub mod orchestrator;
pub mod profile;
pub mod standard;

pub use error::{Error, Result};

/// The fifty bundled theme words for batch story generation, one per line.
pub fn bundled_themes() -> Vec<&'static str> {
    static THEMES: &str = include_str!("../data/themes.txt");
    THEMES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn fifty_bundled_themes() {
        let themes = super::bundled_themes();
        assert_eq!(themes.len(), 50);
        assert!(themes.contains(&"dragons"));
        assert!(themes.contains(&"mysteries"));
        assert!(themes.contains(&"voyages"));
    }
}

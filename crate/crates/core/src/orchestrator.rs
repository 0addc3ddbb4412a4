//! End-to-end generation: build the prompt for the chosen artifact mode,
//! call the backend, and for signal mode iterate measure -> directives ->
//! rewrite until every directive holds or the iteration cap is reached.
//! Every backend call leaves exactly one iteration record in the audit
//! trail.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifact::{
    build_aspect_prompt, build_exemplar_prompt, build_rewrite_prompt, build_teacher_prompt,
    make_directives, ArtifactMode, Direction, PromptArtifact, TemplateSet,
};
use crate::backend::{Backend, DecodingConfig};
use crate::error::{Error, Result};
use crate::extract::TargetSpec;
use crate::eval::{euclidean_distance, Normalization};
use crate::metrics::{extract_profile, segment, AoaLexicon, FeatureVector};
use crate::profile::GoldProfile;
use crate::standard::Standard;

/// Rewrite-loop settings for signal mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Maximum rewrite calls after the initial generation.
    pub max_iterations: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig { max_iterations: 3 }
    }
}

/// One generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    /// Identifier used for result files and evaluation rows.
    pub id: String,
    pub spec: TargetSpec,
    pub mode: ArtifactMode,
    pub decoding: DecodingConfig,
    #[serde(default)]
    pub loop_config: LoopConfig,
    /// Required iff `mode` is signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<GoldProfile>,
}

impl GenerationJob {
    pub fn validate(&self) -> Result<()> {
        self.decoding.validate()?;
        if self.mode == ArtifactMode::Signal {
            let profile = self.profile.as_ref().ok_or_else(|| {
                Error::InvalidInput("signal mode requires a gold profile".to_string())
            })?;
            if profile.standard_id != self.spec.standard_id {
                return Err(Error::InvalidInput(format!(
                    "profile is for standard `{}`, job targets `{}`",
                    profile.standard_id, self.spec.standard_id
                )));
            }
            profile.level(&self.spec.level)?;
        }
        Ok(())
    }
}

/// How a generation run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    SingleShot,
}

/// One backend call and its measurements. `elapsed_ms` is in-memory
/// diagnostics only: it is not serialized, keeping result files
/// byte-identical across reruns with a deterministic backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub prompt: PromptArtifact,
    pub raw_response: String,
    pub profile: FeatureVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_to_gold: Option<f64>,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

/// A finished generation with its full audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub job_id: String,
    pub spec: TargetSpec,
    pub mode: ArtifactMode,
    pub final_text: String,
    pub iterations: Vec<IterationRecord>,
    pub terminated_by: Termination,
}

impl GenerationResult {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<GenerationResult> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Call the backend once through the length-enforcement rule: responses
/// longer than `max_new_tokens` words are truncated at a word boundary;
/// responses shorter than `min_new_tokens` words trigger up to two
/// regenerations with an explicit length clause appended, then an error.
/// Each physical call consumes one index from `call_index`.
pub fn complete(
    backend: &dyn Backend,
    prompt: &str,
    decoding: &DecodingConfig,
    call_index: &mut usize,
) -> Result<String> {
    decoding.validate()?;
    const EXTRA_ATTEMPTS: usize = 2;
    let mut last_len = 0usize;
    for attempt in 0..=EXTRA_ATTEMPTS {
        let effective_prompt = if attempt == 0 {
            prompt.to_string()
        } else {
            format!(
                "{prompt}\n\nWrite at least {} words.",
                decoding.min_new_tokens
            )
        };
        let response = backend.complete_raw(&effective_prompt, decoding, *call_index)?;
        *call_index += 1;
        let words = word_count(&response);
        last_len = words;
        if words >= decoding.min_new_tokens {
            return Ok(truncate_words(&response, decoding.max_new_tokens));
        }
        log::debug!(
            "response of {words} words under minimum {}; attempt {} of {}",
            decoding.min_new_tokens,
            attempt + 1,
            EXTRA_ATTEMPTS + 1
        );
    }
    Err(Error::LengthEnforcementExhausted {
        min: decoding.min_new_tokens,
        got: last_len,
    })
}

fn word_count(text: &str) -> usize {
    segment(text).map(|t| t.token_count()).unwrap_or(0)
}

/// Cut `text` after its `max`-th word token, preserving original spacing.
fn truncate_words(text: &str, max: usize) -> String {
    match segment(text) {
        Ok(t) if t.token_count() > max => {}
        _ => return text.to_string(),
    }
    let mut seen = 0usize;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if !in_word {
                seen += 1;
                in_word = true;
            }
        } else if c != '\'' && c != '-' {
            in_word = false;
        }
        if seen > max {
            return text[..i].trim_end().to_string();
        }
    }
    text.to_string()
}

/// Owns everything a run needs besides the backend: the standard, the
/// prompt templates, and the lexicon for flag extraction.
pub struct Orchestrator {
    pub standard: Standard,
    pub templates: TemplateSet,
    pub lexicon: AoaLexicon,
}

impl Orchestrator {
    pub fn new(standard: Standard, templates: TemplateSet, lexicon: AoaLexicon) -> Orchestrator {
        Orchestrator {
            standard,
            templates,
            lexicon,
        }
    }

    /// Run one job to completion.
    pub fn run(&self, job: &GenerationJob, backend: &dyn Backend) -> Result<GenerationResult> {
        job.validate()?;
        if job.spec.standard_id != self.standard.id {
            return Err(Error::InvalidInput(format!(
                "job targets standard `{}`, orchestrator holds `{}`",
                job.spec.standard_id, self.standard.id
            )));
        }
        match job.mode {
            ArtifactMode::Signal => self.run_signal(job, backend),
            _ => self.run_single_shot(job, backend),
        }
    }

    fn build_prompt(&self, job: &GenerationJob, mode: ArtifactMode) -> Result<PromptArtifact> {
        match mode {
            ArtifactMode::Teacher => {
                build_teacher_prompt(&job.spec, &self.standard, &self.templates)
            }
            ArtifactMode::Aspect => build_aspect_prompt(&job.spec, &self.standard, &self.templates),
            ArtifactMode::Exemplar => {
                build_exemplar_prompt(&job.spec, &self.standard, &self.templates)
            }
            ArtifactMode::Signal => Err(Error::InvalidInput(
                "signal prompts are built by the rewrite loop".to_string(),
            )),
        }
    }

    fn run_single_shot(
        &self,
        job: &GenerationJob,
        backend: &dyn Backend,
    ) -> Result<GenerationResult> {
        let prompt = self.build_prompt(job, job.mode)?;
        let mut call_index = 0usize;
        let started = Instant::now();
        let response = complete(backend, &prompt.text, &job.decoding, &mut call_index)?;
        let elapsed_ms = started.elapsed().as_millis();
        let profile = extract_profile(&response, &self.standard.bound_flags(), &self.lexicon)?;
        Ok(GenerationResult {
            job_id: job.id.clone(),
            spec: job.spec.clone(),
            mode: job.mode,
            final_text: response.clone(),
            iterations: vec![IterationRecord {
                index: 0,
                prompt,
                raw_response: response,
                profile,
                distance_to_gold: None,
                elapsed_ms,
            }],
            terminated_by: Termination::SingleShot,
        })
    }

    /// Signal mode: initial generation with the aspect prompt, then
    /// measure -> directives -> rewrite until all directives hold or the
    /// cap is reached.
    fn run_signal(&self, job: &GenerationJob, backend: &dyn Backend) -> Result<GenerationResult> {
        let gold = job.profile.as_ref().expect("validated");
        let level_stats = gold.level(&job.spec.level)?;
        let mut call_index = 0usize;
        let mut iterations: Vec<IterationRecord> = Vec::new();

        let mut prompt = self.build_prompt(job, ArtifactMode::Aspect)?;
        let mut rewrites_done = 0usize;
        loop {
            let started = Instant::now();
            let response = complete(backend, &prompt.text, &job.decoding, &mut call_index)?;
            let elapsed_ms = started.elapsed().as_millis();
            let profile = extract_profile(&response, &gold.flags, &self.lexicon)?;
            let distance = euclidean_distance(
                &profile.values,
                &level_stats.mean,
                &gold.flags,
                Normalization::Raw,
                None,
            )?;
            iterations.push(IterationRecord {
                index: iterations.len(),
                prompt: prompt.clone(),
                raw_response: response.clone(),
                profile: profile.clone(),
                distance_to_gold: Some(distance),
                elapsed_ms,
            });

            let directives = make_directives(&profile, gold, &job.spec.level)?;
            if directives.iter().all(|d| d.direction == Direction::Hold) {
                return Ok(GenerationResult {
                    job_id: job.id.clone(),
                    spec: job.spec.clone(),
                    mode: job.mode,
                    final_text: response,
                    iterations,
                    terminated_by: Termination::Converged,
                });
            }
            if rewrites_done >= job.loop_config.max_iterations {
                return Ok(GenerationResult {
                    job_id: job.id.clone(),
                    spec: job.spec.clone(),
                    mode: job.mode,
                    final_text: response,
                    iterations,
                    terminated_by: Termination::MaxIterations,
                });
            }
            prompt = build_rewrite_prompt(&response, &directives, &self.templates)?;
            rewrites_done += 1;
        }
    }

    /// Run independent jobs with at most `parallelism` in flight, collecting
    /// results in input order. Per-job failures occupy their result slot;
    /// the batch never aborts.
    pub fn run_batch(
        &self,
        jobs: &[GenerationJob],
        backend: &dyn Backend,
        parallelism: usize,
    ) -> Vec<Result<GenerationResult>> {
        let parallelism = parallelism.max(1);
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<GenerationResult>>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..parallelism.min(jobs.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= jobs.len() {
                        break;
                    }
                    let outcome = self.run(&jobs[i], backend);
                    *slots[i].lock().unwrap() = Some(outcome);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::extract::{make_spec, TaskKind};
    use crate::metrics::FlagId;
    use crate::profile::{compute_profile, CorpusItem, LabeledCorpus};
    use crate::standard::Registry;

    fn lexicon() -> AoaLexicon {
        AoaLexicon::from_entries([("river", 5.0)], "toy").unwrap()
    }

    fn orchestrator() -> Orchestrator {
        Orchestrator::new(
            Standard::bundled_cefr(),
            TemplateSet::bundled(),
            lexicon(),
        )
    }

    fn job(mode: ArtifactMode) -> GenerationJob {
        let spec = make_spec(
            &Registry::bundled(),
            "cefr",
            "B1",
            TaskKind::ThemeWord,
            "rivers",
        )
        .unwrap();
        GenerationJob {
            id: "test-job".to_string(),
            spec,
            mode,
            decoding: DecodingConfig::default(),
            loop_config: LoopConfig::default(),
            profile: None,
        }
    }

    fn canned_story() -> String {
        // 36 words, clears the default 30-word minimum
        "The river ran past the village and the children watched it every single day. \
         They counted boats until the light failed. Nobody wanted to leave the bank \
         before the last lantern went out."
            .to_string()
    }

    /// Gold profile over flags the compliant mock can steer.
    fn signal_profile() -> GoldProfile {
        let texts = [
            crate::backend::synth_text(150, 15, 55),
            crate::backend::synth_text(160, 16, 58),
            crate::backend::synth_text(140, 14, 52),
        ];
        let corpus = LabeledCorpus {
            standard_id: "cefr".to_string(),
            items: texts
                .iter()
                .enumerate()
                .map(|(i, text)| CorpusItem {
                    level: "B1".into(),
                    text: text.clone(),
                    source_id: format!("g{i}"),
                })
                .collect(),
        };
        compute_profile(
            &corpus,
            &[FlagId::TotalWords, FlagId::AvgSentenceLength, FlagId::RootTtr],
            &lexicon(),
        )
        .unwrap()
    }

    #[test]
    fn teacher_job_is_single_shot() {
        let orch = orchestrator();
        let backend = MockBackend::scripted(vec![canned_story()]);
        let result = orch.run(&job(ArtifactMode::Teacher), &backend).unwrap();
        assert_eq!(result.iterations.len(), 1);
        assert_eq!(result.terminated_by, Termination::SingleShot);
        assert_eq!(result.final_text, canned_story());
        assert!(result.iterations[0].distance_to_gold.is_none());
    }

    #[test]
    fn single_shot_trails_never_hold_rewrite_prompts() {
        let orch = orchestrator();
        let backend = MockBackend::scripted(vec![canned_story()]);
        for mode in [ArtifactMode::Teacher, ArtifactMode::Aspect, ArtifactMode::Exemplar] {
            let result = orch.run(&job(mode), &backend).unwrap();
            assert!(result
                .iterations
                .iter()
                .all(|it| it.prompt.mode == mode));
        }
    }

    #[test]
    fn signal_job_requires_profile() {
        let orch = orchestrator();
        let backend = MockBackend::scripted(vec![canned_story()]);
        let err = orch.run(&job(ArtifactMode::Signal), &backend).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn compliant_mock_converges_with_decreasing_distance() {
        let orch = orchestrator();
        let mut signal_job = job(ArtifactMode::Signal);
        signal_job.profile = Some(signal_profile());
        let backend = MockBackend::compliant();
        let result = orch.run(&signal_job, &backend).unwrap();
        assert_eq!(result.terminated_by, Termination::Converged);
        assert!(result.iterations.len() <= 1 + signal_job.loop_config.max_iterations);
        let distances: Vec<f64> = result
            .iterations
            .iter()
            .map(|it| it.distance_to_gold.unwrap())
            .collect();
        for pair in distances.windows(2) {
            assert!(pair[1] < pair[0], "distance not decreasing: {distances:?}");
        }
    }

    #[test]
    fn defiant_mock_hits_iteration_cap() {
        let orch = orchestrator();
        let mut signal_job = job(ArtifactMode::Signal);
        signal_job.profile = Some(signal_profile());
        let backend = MockBackend::scripted(vec![canned_story()]);
        let result = orch.run(&signal_job, &backend).unwrap();
        assert_eq!(result.terminated_by, Termination::MaxIterations);
        assert_eq!(
            result.iterations.len(),
            1 + signal_job.loop_config.max_iterations
        );
        assert_eq!(result.final_text, canned_story());
    }

    #[test]
    fn short_responses_exhaust_length_enforcement() {
        let orch = orchestrator();
        let backend = MockBackend::scripted(vec!["too short".to_string()]);
        let err = orch.run(&job(ArtifactMode::Teacher), &backend).unwrap_err();
        assert!(matches!(err, Error::LengthEnforcementExhausted { .. }));
    }

    #[test]
    fn long_responses_are_truncated_at_word_boundary() {
        let long = (0..400).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let backend = MockBackend::scripted(vec![long]);
        let mut call_index = 0;
        let text = complete(
            &backend,
            "p",
            &DecodingConfig::default(),
            &mut call_index,
        )
        .unwrap();
        assert_eq!(word_count(&text), 300);
    }

    #[test]
    fn batch_preserves_input_order_and_isolates_failures() {
        let orch = orchestrator();
        let good = job(ArtifactMode::Teacher);
        let mut bad = job(ArtifactMode::Signal); // missing profile
        bad.id = "bad".to_string();
        let jobs = vec![good.clone(), bad, good];
        let backend = MockBackend::scripted(vec![canned_story()]);
        let results = orch.run_batch(&jobs, &backend, 4);
        assert_eq!(results.len(), 3);
        assert!(results[0].is_ok());
        assert!(results[1].is_err());
        assert!(results[2].is_ok());
    }

    #[test]
    fn batch_results_identical_across_parallelism() {
        let orch = orchestrator();
        let jobs: Vec<GenerationJob> = (0..6)
            .map(|i| {
                let mut j = job(ArtifactMode::Teacher);
                j.id = format!("job-{i}");
                j
            })
            .collect();
        let backend = MockBackend::scripted(vec![canned_story(), canned_story() + " More."]);
        let serial: Vec<String> = orch
            .run_batch(&jobs, &backend, 1)
            .into_iter()
            .map(|r| r.unwrap().final_text)
            .collect();
        let parallel: Vec<String> = orch
            .run_batch(&jobs, &backend, 4)
            .into_iter()
            .map(|r| r.unwrap().final_text)
            .collect();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn audit_trail_reproduces_byte_for_byte() {
        let orch = orchestrator();
        let mut signal_job = job(ArtifactMode::Signal);
        signal_job.profile = Some(signal_profile());
        let backend = MockBackend::compliant();
        let a = orch.run(&signal_job, &backend).unwrap();
        let b = orch.run(&signal_job, &backend).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}

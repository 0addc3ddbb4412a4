//! LLM backends: an OpenAI-compatible HTTP client and a deterministic mock.
//!
//! Exactly two backends exist. The HTTP backend posts to
//! `{base_url}/v1/chat/completions` with bearer auth from the
//! `STANDARDIZE_API_KEY` environment variable and retries transport
//! failures with exponential backoff. The mock backend replays a script
//! keyed by per-job call index, or runs in "compliant" mode where it parses
//! the directives out of a rewrite prompt and synthesizes text that obeys
//! them — the workhorse for loop tests.

use std::path::Path;
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, FlagId};

/// Environment variable holding the HTTP backend's API key.
pub const API_KEY_ENV: &str = "STANDARDIZE_API_KEY";

/// Decoding parameters for one completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub min_new_tokens: usize,
    pub max_new_tokens: usize,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub model_id: String,
}

impl Default for DecodingConfig {
    /// Nucleus sampling with top-p 0.95, at least 30 and at most 300 new
    /// word tokens.
    fn default() -> Self {
        DecodingConfig {
            min_new_tokens: 30,
            max_new_tokens: 300,
            top_p: 0.95,
            temperature: None,
            model_id: "gpt-4-turbo".to_string(),
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_new_tokens == 0 || self.min_new_tokens > self.max_new_tokens {
            return Err(Error::InvalidInput(format!(
                "decoding requires 0 < min_new_tokens <= max_new_tokens, got {} and {}",
                self.min_new_tokens, self.max_new_tokens
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        Ok(())
    }
}

/// A text-completion backend. `call_index` counts completions issued for
/// the current job, starting at zero; scripted mocks key on it, the HTTP
/// backend ignores it.
pub trait Backend: Send + Sync {
    fn complete_raw(
        &self,
        prompt: &str,
        decoding: &DecodingConfig,
        call_index: usize,
    ) -> Result<String>;
}

/// Retry schedule for transport failures and retryable HTTP statuses.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    /// Delay before the first retry; doubles per retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

/// OpenAI-compatible chat-completion client.
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    top_p: f64,
    max_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

impl HttpBackend {
    /// Client for `{base_url}/v1/chat/completions`. The API key is read
    /// from [`API_KEY_ENV`] when present.
    pub fn new(base_url: &str) -> HttpBackend {
        HttpBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            retry: RetryPolicy::default(),
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> HttpBackend {
        self.api_key = key;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> HttpBackend {
        self.retry = retry;
        self
    }

    fn post_once(&self, prompt: &str, decoding: &DecodingConfig) -> Result<reqwest::blocking::Response> {
        let body = ChatRequest {
            model: &decoding.model_id,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            top_p: decoding.top_p,
            max_tokens: decoding.max_new_tokens,
            temperature: decoding.temperature,
        };
        let mut request = self
            .client
            .post(format!("{}/v1/chat/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        request.send().map_err(|e| Error::Backend {
            status: None,
            message: e.to_string(),
        })
    }
}

impl Backend for HttpBackend {
    fn complete_raw(
        &self,
        prompt: &str,
        decoding: &DecodingConfig,
        _call_index: usize,
    ) -> Result<String> {
        let mut delay = self.retry.base_delay;
        let mut last_error = String::new();
        for attempt in 1..=self.retry.max_attempts {
            match self.post_once(prompt, decoding) {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let parsed: ChatResponse =
                            response.json().map_err(|e| Error::Backend {
                                status: Some(status.as_u16()),
                                message: format!("malformed response body: {e}"),
                            })?;
                        return parsed
                            .choices
                            .first()
                            .map(|c| c.message.content.clone())
                            .ok_or_else(|| Error::Backend {
                                status: Some(status.as_u16()),
                                message: "response carried no choices".to_string(),
                            });
                    }
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    let body = response.text().unwrap_or_default();
                    if !retryable {
                        return Err(Error::Backend {
                            status: Some(status.as_u16()),
                            message: body,
                        });
                    }
                    last_error = format!("status {status}: {body}");
                }
                Err(e) => last_error = e.to_string(),
            }
            if attempt < self.retry.max_attempts {
                log::debug!(
                    "backend attempt {attempt}/{} failed ({last_error}); retrying in {delay:?}",
                    self.retry.max_attempts
                );
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(Error::Transport {
            attempts: self.retry.max_attempts,
            message: last_error,
        })
    }
}

/// Deterministic test backend.
#[derive(Debug, Clone)]
pub enum MockBackend {
    /// Replays `responses[call_index % len]`.
    Scripted { responses: Vec<String> },
    /// Obeys the directives found in rewrite prompts by synthesizing text
    /// whose measured flags land on the requested targets. Supported flags:
    /// total words, total sentences, average sentence length, and both
    /// type-token ratios; directives on other flags are ignored.
    Compliant,
}

impl MockBackend {
    pub fn scripted<S: Into<String>>(responses: Vec<S>) -> MockBackend {
        MockBackend::Scripted {
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }

    /// Load a script file: a JSON array of response strings, replayed by
    /// call index.
    pub fn from_script_file(path: &Path) -> Result<MockBackend> {
        let text = std::fs::read_to_string(path)?;
        let responses: Vec<String> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: format!("expected a JSON array of strings: {e}"),
        })?;
        if responses.is_empty() {
            return Err(Error::InvalidInput(format!(
                "mock script {} has no responses",
                path.display()
            )));
        }
        Ok(MockBackend::Scripted { responses })
    }

    pub fn compliant() -> MockBackend {
        MockBackend::Compliant
    }
}

impl Backend for MockBackend {
    fn complete_raw(
        &self,
        prompt: &str,
        _decoding: &DecodingConfig,
        call_index: usize,
    ) -> Result<String> {
        match self {
            MockBackend::Scripted { responses } => {
                Ok(responses[call_index % responses.len()].clone())
            }
            MockBackend::Compliant => Ok(compliant_response(prompt)),
        }
    }
}

static DIRECTIVE_CLAUSE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^(Increase|Decrease) the (.+) of the story from (-?\d+(?:\.\d+)?) toward (-?\d+(?:\.\d+)?)\.$")
        .unwrap()
});
static HOLD_CLAUSE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^Keep the (.+) of the story unchanged\.$").unwrap());

const STORY_MARKER: &str = "STORY:";

/// Word bank for synthesized text; suffixed with counters when more
/// distinct types are needed.
const WORD_BANK: [&str; 12] = [
    "river", "stone", "lamp", "garden", "cloud", "window", "ship", "road", "tree", "song",
    "door", "field",
];

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn compliant_response(prompt: &str) -> String {
    match prompt.find(STORY_MARKER) {
        Some(story_at) => {
            let head = &prompt[..story_at];
            let story = &prompt[story_at + STORY_MARKER.len()..];
            let targets = directive_targets(head, story);
            synthesize(&targets)
        }
        None => {
            // Initial generation: a deterministic story seeded by the
            // prompt, deliberately short so signal loops have work to do.
            let h = fnv1a(prompt.as_bytes());
            let words = 40 + (h % 21) as usize;
            let sentence_len = 5 + (h % 4) as usize;
            let sentences = (words / sentence_len).max(1);
            let types = 10 + (h % 7) as usize;
            render_text(words, sentences, types.min(words))
        }
    }
}

/// Resolve per-flag targets: explicit values from increase/decrease
/// clauses, measured story values for hold clauses.
fn directive_targets(head: &str, story: &str) -> Vec<(FlagId, f64)> {
    let mut targets = Vec::new();
    for caps in DIRECTIVE_CLAUSE.captures_iter(head) {
        if let Some(flag) = FlagId::from_human_name(&caps[2]) {
            if let Ok(value) = caps[4].parse::<f64>() {
                targets.push((flag, value));
            }
        }
    }
    let held: Vec<FlagId> = HOLD_CLAUSE
        .captures_iter(head)
        .filter_map(|caps| FlagId::from_human_name(&caps[1]))
        .collect();
    if !held.is_empty() {
        if let Ok(measured) = metrics::extract_profile(story, &held, &toy_lexicon()) {
            for flag in held {
                if let Ok(value) = measured.get(flag) {
                    targets.push((flag, value));
                }
            }
        }
    }
    targets
}

fn toy_lexicon() -> metrics::AoaLexicon {
    metrics::AoaLexicon::from_entries([("river", 5.0)], "mock").unwrap()
}

fn target(targets: &[(FlagId, f64)], flag: FlagId) -> Option<f64> {
    targets.iter().find(|(f, _)| *f == flag).map(|(_, v)| *v)
}

/// Choose word count, sentence count, and type count satisfying the
/// targets, then render.
fn synthesize(targets: &[(FlagId, f64)]) -> String {
    let total_words = target(targets, FlagId::TotalWords);
    let total_sentences = target(targets, FlagId::TotalSentences);
    let avg_len = target(targets, FlagId::AvgSentenceLength);

    let words = match (total_words, total_sentences, avg_len) {
        (Some(w), _, _) => w.round() as usize,
        (None, Some(s), Some(l)) => (s * l).round() as usize,
        (None, None, Some(l)) => (l * 10.0).round() as usize,
        (None, Some(s), None) => (s * 10.0).round() as usize,
        (None, None, None) => 120,
    }
    .max(1);
    let sentences = match (total_sentences, avg_len) {
        (Some(s), _) => s.round() as usize,
        (None, Some(l)) if l > 0.0 => (words as f64 / l).round() as usize,
        _ => (words / 10).max(1),
    }
    .clamp(1, words);

    let types = if let Some(rho) = target(targets, FlagId::RootTtr) {
        (rho * (words as f64).sqrt()).round() as usize
    } else if let Some(tau) = target(targets, FlagId::Ttr) {
        (tau * words as f64).round() as usize
    } else {
        (words / 3).max(1)
    }
    .clamp(1, words);

    render_text(words, sentences, types)
}

/// Deterministic text with exactly `words` tokens, `sentences` sentences,
/// and `types` distinct lowercase types. This is the generator behind the
/// compliant mock; it is public so tests and demos can build synthetic
/// corpora whose flags the mock can reproduce.
pub fn synth_text(words: usize, sentences: usize, types: usize) -> String {
    render_text(words.max(1), sentences.max(1), types.max(1))
}

fn render_text(words: usize, sentences: usize, types: usize) -> String {
    let vocab = |i: usize| -> String {
        let base = WORD_BANK[i % WORD_BANK.len()];
        let round = i / WORD_BANK.len();
        if round == 0 {
            base.to_string()
        } else {
            format!("{base}{round}")
        }
    };
    let tokens: Vec<String> = (0..words)
        .map(|i| if i < types { vocab(i) } else { vocab(0) })
        .collect();

    let base_len = words / sentences;
    let remainder = words % sentences;
    let mut out = String::new();
    let mut cursor = 0usize;
    for s in 0..sentences {
        let len = base_len + usize::from(s < remainder);
        if len == 0 {
            continue;
        }
        let mut sentence_words = tokens[cursor..cursor + len].to_vec();
        cursor += len;
        // capitalize sentence-initial token; types are counted case-folded
        if let Some(first) = sentence_words.first_mut() {
            let mut chars = first.chars();
            if let Some(c) = chars.next() {
                *first = c.to_uppercase().collect::<String>() + chars.as_str();
            }
        }
        if s > 0 {
            out.push(' ');
        }
        out.push_str(&sentence_words.join(" "));
        out.push('.');
    }
    out
}

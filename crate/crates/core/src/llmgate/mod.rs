//! The four language-model stages of the extraction pipeline.
//!
//! Each stage renders a prompt template, sends it through an [`LlmClient`],
//! and validates the JSON that comes back. Nothing produced by a model reaches
//! the caller without passing the schema checks in [`parse`].
//!
//! Transport is not handled here; an HTTP client lives in the companion
//! crate, and [`mock::MockClient`] replays canned responses keyed by input
//! digest for offline runs.

pub mod mock;
pub mod parse;
pub mod prompts;
mod types;

pub use types::*;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::ArticleRecord;
use crate::digest::sha256_fields;
use prompts::PromptSet;

/// Maximum number of articles sent together for one episode.
pub const MAX_EPISODE_ARTICLES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Quick,
    Events,
    Episode,
    Responses,
    Nonfundamental,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Quick => "quick",
            Stage::Events => "events",
            Stage::Episode => "episode",
            Stage::Responses => "responses",
            Stage::Nonfundamental => "nonfundamental",
        }
    }
}

/// One model call. `key` is the idempotency key `(stage, subject id)`;
/// `input_digest` identifies the exact inputs and is what mocks replay on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmRequest {
    pub stage: Stage,
    pub key: String,
    pub subject_id: String,
    pub input_digest: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    /// Worth retrying: timeouts, rate limits, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
    /// Replay clients only.
    #[error("no fixture for input digest {0}")]
    NoFixture(String),
}

/// A chat-completion style model endpoint. Shared across worker threads.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<String, ClientError>;

    fn name(&self) -> &str {
        "llm"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("model unavailable after {attempts} attempts: {last}")]
    LlmUnavailable { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("schema violation in {field}: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("{0} articles exceed the per-episode limit of {MAX_EPISODE_ARTICLES}")]
    TooManyArticles(usize),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl LlmError {
    pub fn schema(field: &str, reason: &str) -> Self {
        LlmError::SchemaViolation { field: field.to_string(), reason: reason.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, initial_backoff_ms: 500, multiplier: 2.0, max_backoff_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt + 1`, with `attempt` counted from 1.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let exp = libm::pow(self.multiplier, attempt.saturating_sub(1) as f64);
        let ms = (self.initial_backoff_ms as f64 * exp).min(self.max_backoff_ms as f64);
        Duration::from_millis(ms as u64)
    }
}

/// Blocks between retries. Kept abstract so the core stays free of `std`.
pub trait Sleeper: Sync {
    fn sleep(&self, d: Duration);
}

/// Never waits. For replay clients and tests.
pub struct NoSleep;

impl Sleeper for NoSleep {
    fn sleep(&self, _d: Duration) {}
}

/// Sends `req`, retrying transient failures. At most `policy.max_attempts`
/// calls reach the client.
pub fn call_with_retry(
    client: &dyn LlmClient,
    req: &LlmRequest,
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
) -> Result<String, LlmError> {
    let max = policy.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=max {
        match client.complete(req) {
            Ok(body) => return Ok(body),
            Err(ClientError::Transient(msg)) => {
                last = msg;
                if attempt < max {
                    sleeper.sleep(policy.backoff(attempt));
                }
            }
            Err(ClientError::Fatal(msg)) => {
                return Err(LlmError::LlmUnavailable { attempts: attempt, last: msg });
            }
            Err(ClientError::NoFixture(d)) => {
                return Err(LlmError::schema("response", &format!("no fixture for input digest {d}")));
            }
        }
    }
    Err(LlmError::LlmUnavailable { attempts: max, last })
}

/// Articles about one bank, handed to the episode-level stages.
#[derive(Debug, Clone)]
pub struct EpisodeInput<'a> {
    pub episode_id: &'a str,
    pub bank_id: &'a str,
    pub bank_name: &'a str,
    pub place: &'a str,
    pub articles: &'a [ArticleRecord],
    /// Events already attached to the episode, used for precondition checks.
    pub events: &'a [ArticleEvent],
}

/// Digest of the inputs of an article-level stage.
pub fn article_digest(stage: Stage, article: &ArticleRecord) -> String {
    sha256_fields(&[stage.as_str(), &article.article_id, &article.text])
}

/// Digest of the inputs of an episode-level stage.
pub fn episode_digest(stage: Stage, episode_id: &str, articles: &[ArticleRecord]) -> String {
    let mut fields: Vec<&str> = Vec::with_capacity(2 + 2 * articles.len());
    fields.push(stage.as_str());
    fields.push(episode_id);
    for a in articles {
        fields.push(&a.article_id);
        fields.push(&a.text);
    }
    sha256_fields(&fields)
}

fn place_of(a: &ArticleRecord) -> String {
    match (a.city_raw.trim(), a.state_raw.trim()) {
        ("", "") => String::from("unknown"),
        (c, "") => c.to_string(),
        ("", s) => s.to_string(),
        (c, s) => format!("{c}, {s}"),
    }
}

fn render_articles(articles: &[ArticleRecord]) -> String {
    let mut out = String::new();
    for a in articles {
        out.push_str(&format!(
            "--- article {} | {} | {} | {}\n{}\n\n",
            a.article_id,
            a.newspaper_name,
            a.publication_date,
            place_of(a),
            a.text
        ));
    }
    out
}

/// Runs the stages against one client.
pub struct LlmGate<'a> {
    pub client: &'a dyn LlmClient,
    pub prompts: &'a PromptSet,
    pub retry: RetryPolicy,
    pub sleeper: &'a dyn Sleeper,
}

impl<'a> LlmGate<'a> {
    pub fn new(client: &'a dyn LlmClient, prompts: &'a PromptSet, sleeper: &'a dyn Sleeper) -> Self {
        Self { client, prompts, retry: RetryPolicy::default(), sleeper }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn article_request(&self, stage: Stage, template: &str, a: &ArticleRecord) -> LlmRequest {
        let date = format!("{}", a.publication_date);
        let place = place_of(a);
        let prompt = prompts::render(
            template,
            &[
                ("article_id", a.article_id.as_str()),
                ("newspaper", a.newspaper_name.as_str()),
                ("publication_date", date.as_str()),
                ("place", place.as_str()),
                ("article_text", a.text.as_str()),
            ],
        );
        LlmRequest {
            stage,
            key: format!("{}:{}", stage.as_str(), a.article_id),
            subject_id: a.article_id.clone(),
            input_digest: article_digest(stage, a),
            prompt,
        }
    }

    fn episode_request(&self, stage: Stage, template: &str, ep: &EpisodeInput<'_>) -> LlmRequest {
        let body = render_articles(ep.articles);
        let prompt = prompts::render(
            template,
            &[("bank_name", ep.bank_name), ("place", ep.place), ("articles", body.as_str())],
        );
        LlmRequest {
            stage,
            key: format!("{}:{}", stage.as_str(), ep.episode_id),
            subject_id: ep.episode_id.to_string(),
            input_digest: episode_digest(stage, ep.episode_id, ep.articles),
            prompt,
        }
    }

    fn send(&self, req: &LlmRequest) -> Result<String, LlmError> {
        call_with_retry(self.client, req, &self.retry, self.sleeper)
    }

    /// Cheap false-positive screen.
    pub fn quick_screen(&self, article: &ArticleRecord) -> Result<ScreenVerdict, LlmError> {
        if article.text.trim().is_empty() {
            return Err(LlmError::MalformedResponse(String::from("empty article text; request not sent")));
        }
        let req = self.article_request(Stage::Quick, &self.prompts.quick, article);
        parse::screen_verdict(&self.send(&req)?)
    }

    /// Structured events reported by one article. Items that fail the event
    /// invariants come back in `rejected`; a response that breaks the schema
    /// is an error.
    pub fn extract_events(&self, article: &ArticleRecord) -> Result<Extraction, LlmError> {
        if article.text.trim().is_empty() {
            return Err(LlmError::MalformedResponse(String::from("empty article text; request not sent")));
        }
        let req = self.article_request(Stage::Events, &self.prompts.events, article);
        parse::article_events(&self.send(&req)?, article)
    }

    pub fn analyze_episode(&self, ep: &EpisodeInput<'_>) -> Result<EpisodeAnalysis, LlmError> {
        check_episode_size(ep.articles.len())?;
        let req = self.episode_request(Stage::Episode, &self.prompts.episode, ep);
        parse::episode_analysis(&self.send(&req)?, ep)
    }

    pub fn classify_responses(&self, ep: &EpisodeInput<'_>) -> Result<ResponseFlags, LlmError> {
        check_episode_size(ep.articles.len())?;
        let req = self.episode_request(Stage::Responses, &self.prompts.responses, ep);
        parse::response_flags(&self.send(&req)?)
    }

    pub fn classify_nonfundamental(&self, ep: &EpisodeInput<'_>) -> Result<TriState, LlmError> {
        check_episode_size(ep.articles.len())?;
        if !ep.events.iter().any(|e| e.event_type == EventType::Run) {
            return Err(LlmError::Precondition(String::from("episode has no run")));
        }
        let req = self.episode_request(Stage::Nonfundamental, &self.prompts.nonfundamental, ep);
        parse::nonfundamental(&self.send(&req)?)
    }
}

fn check_episode_size(n: usize) -> Result<(), LlmError> {
    if n == 0 {
        return Err(LlmError::Precondition(String::from("episode has no articles")));
    }
    if n > MAX_EPISODE_ARTICLES {
        return Err(LlmError::TooManyArticles(n));
    }
    Ok(())
}

/// Validated output of the event-extraction stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Extraction {
    pub events: Vec<ArticleEvent>,
    pub rejected: Vec<RejectedEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedEvent {
    pub article_id: String,
    pub index: usize,
    pub reason: String,
}

/// Whether two independent readings of an episode disagree on anything that
/// matters downstream. Disagreement is flagged for review, never resolved here.
pub fn cross_check(primary: &EpisodeAnalysis, secondary: &EpisodeAnalysis) -> bool {
    primary.episode_type_hint != secondary.episode_type_hint || primary.nonfundamental != secondary.nonfundamental
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        fail_first: u32,
        calls: AtomicU32,
    }

    impl LlmClient for Flaky {
        fn complete(&self, _r: &LlmRequest) -> Result<String, ClientError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
            if n <= self.fail_first {
                Err(ClientError::Transient(String::from("503")))
            } else {
                Ok(String::from(r#"{"verdict":"keep"}"#))
            }
        }
    }

    fn req() -> LlmRequest {
        LlmRequest {
            stage: Stage::Quick,
            key: String::from("quick:a"),
            subject_id: String::from("a"),
            input_digest: String::new(),
            prompt: String::new(),
        }
    }

    #[test]
    fn retries_are_bounded() {
        let policy = RetryPolicy { max_attempts: 3, ..RetryPolicy::default() };
        let c = Flaky { fail_first: 10, calls: AtomicU32::new(0) };
        let err = call_with_retry(&c, &req(), &policy, &NoSleep).unwrap_err();
        assert!(matches!(err, LlmError::LlmUnavailable { attempts: 3, .. }));
        assert_eq!(c.calls.load(Ordering::SeqCst), 3);

        let c = Flaky { fail_first: 2, calls: AtomicU32::new(0) };
        assert!(call_with_retry(&c, &req(), &policy, &NoSleep).is_ok());
        assert_eq!(c.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy { max_attempts: 10, initial_backoff_ms: 100, multiplier: 2.0, max_backoff_ms: 1000 };
        assert_eq!(p.backoff(1), Duration::from_millis(100));
        assert_eq!(p.backoff(2), Duration::from_millis(200));
        assert_eq!(p.backoff(3), Duration::from_millis(400));
        assert_eq!(p.backoff(8), Duration::from_millis(1000));
    }
}

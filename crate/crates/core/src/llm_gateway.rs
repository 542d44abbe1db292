//! Blocking HTTP client for chat-completion and embedding endpoints.
//!
//! Replies are parsed against a strict answer schema. Transient failures
//! (timeouts, transport errors, 5xx) are retried with jittered exponential
//! backoff. In `replay` mode every request is answered from a fixture file
//! named after the SHA-256 of the request body, so tests never reach the
//! network; `record` mode performs live calls and writes those fixtures.
//!
//! The API key is read from the environment variable named in the config and
//! is redacted from every error message.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_API_KEY_ENV: &str = "QASUM_API_KEY";

const SYSTEM_INSTRUCTION: &str = "Reply with a single JSON object and nothing else. \
Either {\"answer\": string, \"source_sentence\": string, \"confidence\": number in [0, 1]} \
where source_sentence is copied verbatim from the provided context, \
or {\"no_answer\": true} when the context does not answer the question.";

const EXCERPT_CHARS: usize = 200;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("HTTP status {status}: {excerpt}")]
    Http { status: u16, excerpt: String },
    #[error("reply does not match the answer schema ({field}): {excerpt}")]
    Schema { field: String, excerpt: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid gateway config: {0}")]
    Config(String),
    #[error("no recorded reply for request {key} in {dir}")]
    ReplayMiss { key: String, dir: PathBuf },
    #[error("fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
}

impl GatewayError {
    fn is_retriable(&self) -> bool {
        match self {
            GatewayError::Timeout { .. } | GatewayError::Transport(_) => true,
            GatewayError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    #[default]
    Live,
    Replay,
    Record,
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_owned()
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    2
}
fn default_max_in_flight() -> usize {
    4
}
fn default_chat_path() -> String {
    "/v1/chat/completions".to_owned()
}
fn default_embed_path() -> String {
    "/v1/embeddings".to_owned()
}
fn default_backoff_base_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub base_url: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    pub model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_chat_path")]
    pub chat_path: String,
    #[serde(default = "default_embed_path")]
    pub embed_path: String,
    #[serde(default)]
    pub mode: GatewayMode,
    /// Directory of `<sha256>.json` recordings for replay/record modes.
    #[serde(default)]
    pub fixtures_dir: Option<PathBuf>,
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> GatewayConfig {
        GatewayConfig {
            base_url: base_url.into(),
            api_key_env: default_api_key_env(),
            model: model.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            max_in_flight: default_max_in_flight(),
            chat_path: default_chat_path(),
            embed_path: default_embed_path(),
            mode: GatewayMode::Live,
            fixtures_dir: None,
            backoff_base_ms: default_backoff_base_ms(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let url = url::Url::parse(&self.base_url)
            .map_err(|e| GatewayError::Config(format!("base_url {:?}: {e}", self.base_url)))?;
        if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
            return Err(GatewayError::Config(format!(
                "base_url {:?} must be an http(s) URL with a host",
                self.base_url
            )));
        }
        if self.timeout_ms < 1000 {
            return Err(GatewayError::Config(format!(
                "timeout_ms must be >= 1000, got {}",
                self.timeout_ms
            )));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be positive".into()));
        }
        if self.api_key_env.is_empty() {
            return Err(GatewayError::Config(
                "api_key_env must name an environment variable".into(),
            ));
        }
        if matches!(self.mode, GatewayMode::Replay | GatewayMode::Record) && self.fixtures_dir.is_none() {
            return Err(GatewayError::Config("replay and record modes need fixtures_dir".into()));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerReply {
    pub answer: String,
    pub source_sentence: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChatReply {
    Answer(AnswerReply),
    NoAnswer,
}

/// Recorded response, one per request-body hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recording {
    pub status: u16,
    pub body: Value,
}

impl Recording {
    fn body_text(&self) -> String {
        match &self.body {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
}

pub fn request_key(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

struct ApiKey(String);

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

/// Counting semaphore that admits waiters strictly in arrival order.
#[derive(Debug)]
struct FairLimiter {
    capacity: usize,
    state: Mutex<LimiterState>,
    cond: Condvar,
}

#[derive(Debug, Default)]
struct LimiterState {
    next_ticket: u64,
    next_admit: u64,
    in_flight: usize,
}

struct Permit<'a>(&'a FairLimiter);

impl FairLimiter {
    fn new(capacity: usize) -> FairLimiter {
        FairLimiter {
            capacity,
            state: Mutex::new(LimiterState::default()),
            cond: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let ticket = state.next_ticket;
        state.next_ticket += 1;
        while !(state.next_admit == ticket && state.in_flight < self.capacity) {
            state = self.cond.wait(state).unwrap_or_else(|e| e.into_inner());
        }
        state.next_admit += 1;
        state.in_flight += 1;
        drop(state);
        self.cond.notify_all();
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut state = self.0.state.lock().unwrap_or_else(|e| e.into_inner());
        state.in_flight -= 1;
        drop(state);
        self.0.cond.notify_all();
    }
}

#[derive(Debug)]
pub struct Gateway {
    cfg: GatewayConfig,
    key: Option<ApiKey>,
    agent: ureq::Agent,
    limiter: FairLimiter,
    rng: Mutex<StdRng>,
}

impl Gateway {
    /// Validates the config and, outside replay mode, reads the API key.
    /// A missing key fails here, before any request is made.
    pub fn new(cfg: GatewayConfig, seed: u64) -> Result<Gateway, GatewayError> {
        cfg.validate()?;
        let key = match cfg.mode {
            GatewayMode::Replay => None,
            GatewayMode::Live | GatewayMode::Record => match std::env::var(&cfg.api_key_env) {
                Ok(k) if !k.trim().is_empty() => Some(ApiKey(k)),
                _ => {
                    return Err(GatewayError::Auth(format!(
                        "environment variable {} is not set",
                        cfg.api_key_env
                    )))
                }
            },
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Gateway {
            limiter: FairLimiter::new(cfg.max_in_flight),
            rng: Mutex::new(StdRng::seed_from_u64(seed)),
            cfg,
            key,
            agent,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn chat_answer(&self, prompt: &str) -> Result<ChatReply, GatewayError> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_INSTRUCTION},
                {"role": "user", "content": prompt},
            ],
        })
        .to_string();
        let reply = self.post(&self.cfg.chat_path, &body)?;
        parse_chat_response(&reply).map_err(|e| self.redact_error(e))
    }

    /// Embeds a batch of texts; vectors come back L2-normalized and in input
    /// order.
    pub fn embed_remote(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        self.embed_remote_with(texts, &self.cfg.model, &self.cfg.embed_path)
    }

    /// `embed_remote` against an explicit model name and endpoint path.
    pub fn embed_remote_with(&self, texts: &[String], model: &str, path: &str) -> Result<Vec<Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::Precondition(
                "embed_remote needs at least one text".into(),
            ));
        }
        let body = json!({ "model": model, "input": texts }).to_string();
        let reply = self.post(path, &body)?;
        parse_embedding_response(&reply, texts.len()).map_err(|e| self.redact_error(e))
    }

    fn post(&self, path: &str, body: &str) -> Result<String, GatewayError> {
        let _permit = self.limiter.acquire();
        let url = self.cfg.url(path);
        let mut attempt = 0;
        loop {
            log::debug!("POST {url} attempt {}", attempt + 1);
            let result = self.send_once(&url, body).and_then(|(status, text)| match status {
                200..=299 => Ok(text),
                401 | 403 => Err(GatewayError::Auth(format!(
                    "endpoint rejected credentials (HTTP {status})"
                ))),
                _ => Err(GatewayError::Http {
                    status,
                    excerpt: excerpt(&text),
                }),
            });
            match result {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retriable() && attempt < self.cfg.max_retries => {
                    let delay = self.backoff(attempt);
                    log::warn!(
                        "{} failed ({}); retrying in {} ms",
                        url,
                        self.redact(&e.to_string()),
                        delay.as_millis()
                    );
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(GatewayError::Timeout { .. }) => {
                    return Err(GatewayError::Timeout { attempts: attempt + 1 });
                }
                Err(e) => return Err(self.redact_error(e)),
            }
        }
    }

    fn send_once(&self, url: &str, body: &str) -> Result<(u16, String), GatewayError> {
        match self.cfg.mode {
            GatewayMode::Replay => self.replay(body),
            GatewayMode::Live => self.send_live(url, body),
            GatewayMode::Record => {
                let (status, text) = self.send_live(url, body)?;
                self.record(body, status, &text)?;
                Ok((status, text))
            }
        }
    }

    fn send_live(&self, url: &str, body: &str) -> Result<(u16, String), GatewayError> {
        let key = self
            .key
            .as_ref()
            .ok_or_else(|| GatewayError::Auth(format!("environment variable {} is not set", self.cfg.api_key_env)))?;
        let response = self
            .agent
            .post(url)
            .header("Authorization", &format!("Bearer {}", key.0))
            .content_type("application/json")
            .send(body);
        match response {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let text = resp.body_mut().read_to_string().map_err(|e| self.classify(e))?;
                Ok((status, text))
            }
            Err(e) => Err(self.classify(e)),
        }
    }

    fn classify(&self, err: ureq::Error) -> GatewayError {
        match err {
            ureq::Error::Timeout(_) => GatewayError::Timeout { attempts: 1 },
            ureq::Error::Io(e) if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
                GatewayError::Timeout { attempts: 1 }
            }
            other => GatewayError::Transport(self.redact(&other.to_string())),
        }
    }

    fn fixtures_dir(&self) -> Result<&PathBuf, GatewayError> {
        self.cfg
            .fixtures_dir
            .as_ref()
            .ok_or_else(|| GatewayError::Config("fixtures_dir is not set".into()))
    }

    fn replay(&self, body: &str) -> Result<(u16, String), GatewayError> {
        let dir = self.fixtures_dir()?;
        let key = request_key(body);
        let path = dir.join(format!("{key}.json"));
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(GatewayError::ReplayMiss { key, dir: dir.clone() })
            }
            Err(e) => {
                return Err(GatewayError::Fixture {
                    path,
                    message: e.to_string(),
                })
            }
        };
        let recording: Recording = serde_json::from_str(&text).map_err(|e| GatewayError::Fixture {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok((recording.status, recording.body_text()))
    }

    fn record(&self, body: &str, status: u16, text: &str) -> Result<(), GatewayError> {
        let dir = self.fixtures_dir()?;
        let path = dir.join(format!("{}.json", request_key(body)));
        let recording = Recording {
            status,
            body: Value::String(self.redact(text)),
        };
        let fixture_err = |message: String| GatewayError::Fixture {
            path: path.clone(),
            message,
        };
        fs::create_dir_all(dir).map_err(|e| fixture_err(e.to_string()))?;
        let serialized = serde_json::to_string_pretty(&recording).map_err(|e| fixture_err(e.to_string()))?;
        fs::write(&path, serialized).map_err(|e| fixture_err(e.to_string()))
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.cfg.backoff_base_ms.saturating_mul(1u64 << attempt.min(16));
        let jitter: f64 = self.rng.lock().unwrap_or_else(|e| e.into_inner()).gen_range(0.5..=1.0);
        Duration::from_millis((base as f64 * jitter) as u64)
    }

    fn redact(&self, text: &str) -> String {
        match &self.key {
            Some(ApiKey(k)) if !k.is_empty() => text.replace(k.as_str(), "<redacted>"),
            _ => text.to_owned(),
        }
    }

    fn redact_error(&self, err: GatewayError) -> GatewayError {
        match err {
            GatewayError::Http { status, excerpt } => GatewayError::Http {
                status,
                excerpt: self.redact(&excerpt),
            },
            GatewayError::Schema { field, excerpt } => GatewayError::Schema {
                field,
                excerpt: self.redact(&excerpt),
            },
            GatewayError::Transport(m) => GatewayError::Transport(self.redact(&m)),
            GatewayError::Auth(m) => GatewayError::Auth(self.redact(&m)),
            other => other,
        }
    }
}

fn excerpt(text: &str) -> String {
    let mut out: String = text.chars().take(EXCERPT_CHARS).collect();
    if text.chars().count() > EXCERPT_CHARS {
        out.push('…');
    }
    out
}

fn schema_err(field: &str, raw: &str) -> GatewayError {
    GatewayError::Schema {
        field: field.to_owned(),
        excerpt: excerpt(raw),
    }
}

/// Pulls the assistant message out of a chat-completion body and parses it
/// against the answer schema.
pub fn parse_chat_response(body: &str) -> Result<ChatReply, GatewayError> {
    let envelope: Value = serde_json::from_str(body).map_err(|_| schema_err("body", body))?;
    let content = envelope
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| schema_err("choices[0].message.content", body))?;
    parse_answer_content(content)
}

/// Strict parse of the model's JSON answer object.
pub fn parse_answer_content(content: &str) -> Result<ChatReply, GatewayError> {
    let value: Value = serde_json::from_str(content.trim()).map_err(|_| schema_err("content", content))?;
    let obj: &Map<String, Value> = value.as_object().ok_or_else(|| schema_err("content", content))?;

    if let Some(flag) = obj.get("no_answer") {
        return match flag {
            Value::Bool(true) if obj.len() == 1 => Ok(ChatReply::NoAnswer),
            _ => Err(schema_err("no_answer", content)),
        };
    }
    if let Some(unknown) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "answer" | "source_sentence" | "confidence"))
    {
        return Err(schema_err(unknown, content));
    }
    let text_field = |name: &str| -> Result<String, GatewayError> {
        match obj.get(name) {
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
            _ => Err(schema_err(name, content)),
        }
    };
    let answer = text_field("answer")?;
    let source_sentence = text_field("source_sentence")?;
    let confidence = obj
        .get("confidence")
        .and_then(Value::as_f64)
        .filter(|c| (0.0..=1.0).contains(c))
        .ok_or_else(|| schema_err("confidence", content))?;
    Ok(ChatReply::Answer(AnswerReply {
        answer,
        source_sentence,
        confidence,
    }))
}

/// Parses an embeddings body (`{"data": [{"index", "embedding"}]}`),
/// restores input order and L2-normalizes each vector.
pub fn parse_embedding_response(body: &str, expected: usize) -> Result<Vec<Vec<f64>>, GatewayError> {
    let envelope: Value = serde_json::from_str(body).map_err(|_| schema_err("body", body))?;
    let data = envelope
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| schema_err("data", body))?;
    if data.len() != expected {
        return Err(schema_err("data.length", body));
    }
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; expected];
    for (position, item) in data.iter().enumerate() {
        let index = match item.get("index") {
            None => position,
            Some(v) => v
                .as_u64()
                .map(|i| i as usize)
                .filter(|&i| i < expected)
                .ok_or_else(|| schema_err("data[].index", body))?,
        };
        let values = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| schema_err("data[].embedding", body))?
            .iter()
            .map(|v| v.as_f64().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| schema_err("data[].embedding", body))?;
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if values.is_empty() || norm == 0.0 || slots[index].is_some() {
            return Err(schema_err("data[].embedding", body));
        }
        slots[index] = Some(values.into_iter().map(|x| x / norm).collect());
    }
    slots
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| schema_err("data[].index", body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn chat_body(content: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    #[test]
    fn parses_valid_answer() {
        let reply = parse_chat_response(&chat_body(
            r#"{"answer": "lisinopril", "source_sentence": "Started lisinopril.", "confidence": 0.9}"#,
        ))
        .unwrap();
        assert_eq!(
            reply,
            ChatReply::Answer(AnswerReply {
                answer: "lisinopril".into(),
                source_sentence: "Started lisinopril.".into(),
                confidence: 0.9,
            })
        );
        assert_eq!(
            parse_chat_response(&chat_body(r#"{"no_answer": true}"#)).unwrap(),
            ChatReply::NoAnswer
        );
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let err = parse_chat_response(&chat_body(
            r#"{"answer": "x", "source_sentence": "x.", "confidence": 1.7}"#,
        ))
        .unwrap_err();
        match err {
            GatewayError::Schema { field, .. } => assert_eq!(field, "confidence"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_replies() {
        let field_of = |body: String| match parse_chat_response(&body).unwrap_err() {
            GatewayError::Schema { field, .. } => field,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(field_of("not json".into()), "body");
        assert_eq!(
            field_of(json!({"choices": []}).to_string()),
            "choices[0].message.content"
        );
        assert_eq!(field_of(chat_body("The answer is lisinopril.")), "content");
        assert_eq!(
            field_of(chat_body(r#"{"answer": "x", "confidence": 0.5}"#)),
            "source_sentence"
        );
        assert_eq!(
            field_of(chat_body(
                r#"{"answer": "x", "source_sentence": "y", "confidence": 0.5, "extra": 1}"#
            )),
            "extra"
        );
        assert_eq!(field_of(chat_body(r#"{"no_answer": false}"#)), "no_answer");
    }

    #[test]
    fn embedding_reply_is_reordered_and_normalized() {
        let body = json!({"data": [
            {"index": 1, "embedding": [0.0, 2.0]},
            {"index": 0, "embedding": [3.0, 4.0]},
        ]})
        .to_string();
        let vectors = parse_embedding_response(&body, 2).unwrap();
        assert_eq!(vectors[0], vec![0.6, 0.8]);
        assert_eq!(vectors[1], vec![0.0, 1.0]);
        assert!(parse_embedding_response(&body, 3).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = GatewayConfig::new("https://api.example.com", "m");
        assert!(cfg.validate().is_ok());
        cfg.timeout_ms = 999;
        assert!(matches!(cfg.validate(), Err(GatewayError::Config(_))));
        cfg.timeout_ms = 1000;
        cfg.base_url = "not a url".into();
        assert!(matches!(cfg.validate(), Err(GatewayError::Config(_))));
        cfg.base_url = "ftp://example.com".into();
        assert!(cfg.validate().is_err());
        cfg.base_url = "http://localhost:8080".into();
        cfg.mode = GatewayMode::Replay;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_key_fails_before_any_request() {
        let mut cfg = GatewayConfig::new("http://127.0.0.1:9", "m");
        cfg.api_key_env = "QASUM_TEST_KEY_THAT_IS_NEVER_SET".into();
        match Gateway::new(cfg, 0) {
            Err(GatewayError::Auth(msg)) => assert!(msg.contains("QASUM_TEST_KEY_THAT_IS_NEVER_SET")),
            other => panic!("expected auth error, got {other:?}"),
        }
    }

    #[test]
    fn limiter_caps_concurrency() {
        let limiter = Arc::new(FairLimiter::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (limiter, active, peak) = (limiter.clone(), active.clone(), peak.clone());
                thread::spawn(move || {
                    let _p = limiter.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(Duration::from_millis(10));
                    active.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn limiter_admits_in_arrival_order() {
        let limiter = Arc::new(FairLimiter::new(1));
        let order = Arc::new(Mutex::new(Vec::new()));
        let first = limiter.acquire();
        let mut handles = Vec::new();
        for i in 0..4 {
            let (l, o) = (limiter.clone(), order.clone());
            handles.push(thread::spawn(move || {
                let _p = l.acquire();
                o.lock().unwrap().push(i);
            }));
            // wait until thread i holds its ticket before starting the next one
            while limiter.state.lock().unwrap().next_ticket < i as u64 + 2 {
                thread::yield_now();
            }
        }
        drop(first);
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(*order.lock().unwrap(), vec![0, 1, 2, 3]);
    }
}

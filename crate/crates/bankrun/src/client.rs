//! Model clients: an HTTP chat-completion client, replay fixtures on disk,
//! an in-flight limiter and a request/response audit recorder.

use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use bankrun_core::llmgate::mock::MockClient;
use bankrun_core::llmgate::{ClientError, LlmClient, LlmRequest, Sleeper};
use bankrun_core::digest::sha256_hex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ClientConfig;
use crate::error::{Error, Result};
use crate::io::{read_jsonl_strict, write_jsonl};

pub struct StdSleeper;

impl Sleeper for StdSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Chat-completion style endpoint. The bearer token is read from the
/// environment once, held in memory and never serialized.
pub struct HttpClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    token: Option<String>,
}

impl HttpClient {
    pub fn new(cfg: &ClientConfig) -> Result<Self> {
        let token = std::env::var(&cfg.token_env).ok().filter(|t| !t.is_empty());
        Self::with_token(cfg, token)
    }

    pub fn with_token(cfg: &ClientConfig, token: Option<String>) -> Result<Self> {
        if cfg.base_url.trim().is_empty() {
            return Err(Error::ConfigInvalid(String::from("llm.base_url is empty")));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpClient {
            agent,
            url: cfg.base_url.clone(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            token,
        })
    }

    fn body(&self, req: &LlmRequest) -> Value {
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "response_format": {"type": "json_object"},
            "messages": [{"role": "user", "content": req.prompt}],
        })
    }
}

/// Pulls the assistant message out of a chat-completion reply. Bodies that
/// are not in that shape are passed through for the stage parser to judge.
pub fn message_content(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.pointer("/choices/0/message/content").and_then(Value::as_str).map(String::from))
        .unwrap_or_else(|| body.to_string())
}

impl LlmClient for HttpClient {
    fn complete(&self, req: &LlmRequest) -> std::result::Result<String, ClientError> {
        let mut r = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            r = r.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = match r.send_json(self.body(req)) {
            Ok(resp) => resp,
            Err(e @ (ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound)) => {
                return Err(ClientError::Transient(e.to_string()))
            }
            Err(e) => return Err(ClientError::Fatal(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| ClientError::Transient(e.to_string()))?;
        match status {
            200..=299 => Ok(message_content(&text)),
            408 | 429 | 500..=599 => Err(ClientError::Transient(format!("http {status}"))),
            _ => Err(ClientError::Fatal(format!("http {status}"))),
        }
    }

    fn name(&self) -> &str {
        &self.model
    }
}

/// One replay fixture line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub input_digest: String,
    pub reply: String,
}

pub fn load_fixtures(path: &Path, name: &str) -> Result<MockClient> {
    let rows: Vec<Fixture> = read_jsonl_strict(path)?;
    let mut m = MockClient::named(name);
    for f in rows {
        m.insert(f.input_digest, f.reply);
    }
    Ok(m)
}

pub fn save_fixtures(path: &Path, mock: &MockClient) -> Result<()> {
    let rows: Vec<Fixture> = mock
        .fixtures()
        .iter()
        .map(|(d, r)| Fixture { input_digest: d.clone(), reply: r.clone() })
        .collect();
    write_jsonl(path, &rows)
}

/// Lets at most `limit` calls into the inner client at once.
pub struct Bounded<C> {
    inner: C,
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

impl<C: LlmClient> Bounded<C> {
    pub fn new(inner: C, limit: usize) -> Self {
        Bounded { inner, limit: limit.max(1), busy: Mutex::new(0), freed: Condvar::new() }
    }
}

struct Slot<'a, C> {
    b: &'a Bounded<C>,
}

impl<C> Drop for Slot<'_, C> {
    fn drop(&mut self) {
        let mut n = self.b.busy.lock().unwrap_or_else(|p| p.into_inner());
        *n -= 1;
        self.b.freed.notify_one();
    }
}

impl<C: LlmClient> LlmClient for Bounded<C> {
    fn complete(&self, req: &LlmRequest) -> std::result::Result<String, ClientError> {
        {
            let mut n = self.busy.lock().unwrap_or_else(|p| p.into_inner());
            while *n >= self.limit {
                n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
            }
            *n += 1;
        }
        let _slot = Slot { b: self };
        self.inner.complete(req)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Audit entry. Holds the prompt digest rather than the prompt, and never
/// any credential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub client: String,
    pub stage: String,
    pub key: String,
    pub subject_id: String,
    pub input_digest: String,
    pub prompt_sha256: String,
    pub attempt: u32,
    pub outcome: String,
    pub response: Option<String>,
}

/// Records every call. Entries are sorted by key and attempt on flush so the
/// log does not depend on thread scheduling.
pub struct Audited<C> {
    inner: C,
    entries: Mutex<Vec<AuditEntry>>,
}

impl<C: LlmClient> Audited<C> {
    pub fn new(inner: C) -> Self {
        Audited { inner, entries: Mutex::new(Vec::new()) }
    }

    pub fn take(&self) -> Vec<AuditEntry> {
        let mut v = std::mem::take(&mut *self.entries.lock().unwrap_or_else(|p| p.into_inner()));
        v.sort_by(|a, b| (&a.key, a.attempt).cmp(&(&b.key, b.attempt)));
        v
    }
}

impl<C: LlmClient> LlmClient for Audited<C> {
    fn complete(&self, req: &LlmRequest) -> std::result::Result<String, ClientError> {
        let out = self.inner.complete(req);
        let mut entries = self.entries.lock().unwrap_or_else(|p| p.into_inner());
        let attempt = 1 + entries.iter().filter(|e| e.key == req.key).count() as u32;
        let (outcome, response) = match &out {
            Ok(body) => (String::from("ok"), Some(body.clone())),
            Err(e) => (e.to_string(), None),
        };
        entries.push(AuditEntry {
            client: self.inner.name().to_string(),
            stage: req.stage.as_str().to_string(),
            key: req.key.clone(),
            subject_id: req.subject_id.clone(),
            input_digest: req.input_digest.clone(),
            prompt_sha256: sha256_hex(req.prompt.as_bytes()),
            attempt,
            outcome,
            response,
        });
        out
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// A boxed client usable where a sized `LlmClient` is needed.
pub struct Dyn(pub Box<dyn LlmClient>);

impl LlmClient for Dyn {
    fn complete(&self, req: &LlmRequest) -> std::result::Result<String, ClientError> {
        self.0.complete(req)
    }

    fn name(&self) -> &str {
        self.0.name()
    }
}

/// Client for one configured endpoint: replay fixtures when in mock mode,
/// HTTP otherwise.
pub fn build_client(cfg: &ClientConfig, mock_override: Option<&Path>, name: &str) -> Result<Box<dyn LlmClient>> {
    use crate::config::ClientMode;
    let inner: Box<dyn LlmClient> = match (mock_override, cfg.mode, &cfg.fixtures) {
        (Some(p), _, _) => Box::new(load_fixtures(p, name)?),
        (None, ClientMode::Mock, Some(p)) => Box::new(load_fixtures(p, name)?),
        (None, ClientMode::Mock, None) => {
            return Err(Error::ConfigInvalid(String::from("mock client selected but no fixtures file configured")))
        }
        (None, ClientMode::Http, _) => Box::new(HttpClient::new(cfg)?),
    };
    Ok(Box::new(Bounded::new(Dyn(inner), cfg.max_concurrent)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bankrun_core::llmgate::Stage;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn req(key: &str) -> LlmRequest {
        LlmRequest {
            stage: Stage::Quick,
            key: key.to_string(),
            subject_id: key.to_string(),
            input_digest: key.to_string(),
            prompt: String::from("p"),
        }
    }

    /// Answers each connection with the next canned (status, body) and
    /// returns the request heads it saw.
    fn serve(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat", l.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let mut heads = Vec::new();
            for (status, body) in replies {
                let (mut s, _) = l.accept().unwrap();
                let mut r = BufReader::new(s.try_clone().unwrap());
                let mut head = String::new();
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    r.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                    head.push_str(&line);
                }
                let mut buf = vec![0; len];
                r.read_exact(&mut buf).unwrap();
                head.push_str(&String::from_utf8(buf).unwrap());
                heads.push(head);
                write!(s, "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()).unwrap();
            }
            heads
        });
        (url, h)
    }

    #[test]
    fn http_client_sends_bearer_and_unwraps_content() {
        let reply = json!({"choices": [{"message": {"content": "{\"verdict\":\"keep\"}"}}]}).to_string();
        let (url, h) = serve(vec![(200, reply)]);
        let cfg = ClientConfig { base_url: url, ..ClientConfig::default() };
        let c = HttpClient::with_token(&cfg, Some(String::from("s3cret"))).unwrap();
        assert_eq!(c.complete(&req("a")).unwrap(), "{\"verdict\":\"keep\"}");
        let heads = h.join().unwrap();
        assert!(heads[0].contains("Bearer s3cret"));
    }

    #[test]
    fn http_status_classes() {
        let (url, h) = serve(vec![(429, String::new()), (503, String::new()), (401, String::new())]);
        let cfg = ClientConfig { base_url: url, ..ClientConfig::default() };
        let c = HttpClient::with_token(&cfg, None).unwrap();
        assert!(matches!(c.complete(&req("a")), Err(ClientError::Transient(_))));
        assert!(matches!(c.complete(&req("a")), Err(ClientError::Transient(_))));
        assert!(matches!(c.complete(&req("a")), Err(ClientError::Fatal(_))));
        h.join().unwrap();
    }

    #[test]
    fn fixtures_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.jsonl");
        let m: MockClient = [(String::from("d1"), String::from("r1"))].into_iter().collect();
        save_fixtures(&p, &m).unwrap();
        let back = load_fixtures(&p, "mock").unwrap();
        assert_eq!(back.complete(&req("d1")).unwrap(), "r1");
        assert!(matches!(back.complete(&req("d2")), Err(ClientError::NoFixture(_))));
    }

    #[test]
    fn audit_log_has_no_token_and_counts_attempts() {
        let m: MockClient = [(String::from("a"), String::from("r"))].into_iter().collect();
        let a = Audited::new(m);
        let _ = a.complete(&req("b"));
        let _ = a.complete(&req("a"));
        let _ = a.complete(&req("b"));
        let log = a.take();
        assert_eq!(log.iter().map(|e| (e.key.as_str(), e.attempt)).collect::<Vec<_>>(), [("a", 1), ("b", 1), ("b", 2)]);
        assert_eq!(log[0].response.as_deref(), Some("r"));
    }
}

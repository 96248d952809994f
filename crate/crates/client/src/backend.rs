//! Transports that turn a request into reply text: the HTTP endpoint and
//! the fixture-backed stub.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use diagbench_core::Digest;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::EndpointConfig;
use crate::request::ModelRequest;
use crate::ClientError;

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub text: String,
    pub metadata: Value,
}

/// Failure of a single attempt, before retry policy is applied.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptError {
    Status {
        status: u16,
        body: String,
        retry_after: Option<Duration>,
    },
    Timeout,
    Transport(String),
    Malformed(String),
    Stub(String),
}

impl AttemptError {
    pub fn retryable(&self) -> bool {
        match self {
            AttemptError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            AttemptError::Timeout | AttemptError::Transport(_) => true,
            AttemptError::Malformed(_) | AttemptError::Stub(_) => false,
        }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn send(&self, request: &ModelRequest) -> Result<Reply, AttemptError>;
}

pub const BODY_EXCERPT: usize = 512;

pub fn excerpt(body: &str) -> String {
    let mut end = body.len().min(BODY_EXCERPT);
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    body[..end].to_string()
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: &EndpointConfig) -> Result<Self, ClientError> {
        let base = config
            .base_url
            .as_deref()
            .ok_or_else(|| ClientError::Config("http endpoint needs base_url".into()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| ClientError::Config(format!("building http client: {e}")))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key,
        })
    }
}

fn parse_retry_after(value: Option<&reqwest::header::HeaderValue>) -> Option<Duration> {
    let secs: f64 = value?.to_str().ok()?.trim().parse().ok()?;
    (secs.is_finite() && secs >= 0.0).then(|| Duration::from_secs_f64(secs))
}

/// Pulls the assistant text and a small metadata record out of a
/// chat-completions response body.
pub fn parse_completion(body: &Value) -> Result<Reply, AttemptError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| AttemptError::Malformed("response has no choices".into()))?;
    let content = &choice["message"]["content"];
    let text = match content {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter(|p| p["type"] == "text")
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(""),
        other => return Err(AttemptError::Malformed(format!("unexpected content {other}"))),
    };
    let metadata = json!({
        "id": body.get("id").cloned().unwrap_or(Value::Null),
        "model": body.get("model").cloned().unwrap_or(Value::Null),
        "finish_reason": choice.get("finish_reason").cloned().unwrap_or(Value::Null),
        "usage": body.get("usage").cloned().unwrap_or(Value::Null),
    });
    Ok(Reply { text, metadata })
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn send(&self, request: &ModelRequest) -> Result<Reply, AttemptError> {
        let mut builder = self.client.post(&self.url).json(&request.to_wire());
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() {
                AttemptError::Timeout
            } else {
                AttemptError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let retry_after = parse_retry_after(resp.headers().get(reqwest::header::RETRY_AFTER));
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                AttemptError::Timeout
            } else {
                AttemptError::Transport(e.to_string())
            }
        })?;
        if !(200..300).contains(&status) {
            return Err(AttemptError::Status {
                status,
                body: excerpt(&body),
                retry_after,
            });
        }
        let value: Value =
            serde_json::from_str(&body).map_err(|e| AttemptError::Malformed(format!("{e}: {}", excerpt(&body))))?;
        parse_completion(&value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnMiss {
    Reply(String),
    Error(String),
}

/// Canned replies keyed by request digest or by the instruction's hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubFixture {
    #[serde(default)]
    pub description: String,
    /// When set, requests without an image get `text_only_reply`.
    #[serde(default)]
    pub require_image: bool,
    #[serde(default)]
    pub text_only_reply: String,
    pub on_miss: OnMiss,
    #[serde(default)]
    pub by_request: BTreeMap<String, String>,
    /// Keyed by the SHA-256 of the instruction text.
    #[serde(default)]
    pub by_instruction: BTreeMap<String, String>,
}

impl StubFixture {
    pub fn new(on_miss: OnMiss) -> Self {
        StubFixture {
            description: String::new(),
            require_image: false,
            text_only_reply: String::new(),
            on_miss,
            by_request: BTreeMap::new(),
            by_instruction: BTreeMap::new(),
        }
    }

    pub fn instruction_key(instruction: &str) -> String {
        Digest::of(instruction).as_str().to_string()
    }

    pub fn insert_instruction(&mut self, instruction: &str, reply: impl Into<String>) {
        self.by_instruction.insert(Self::instruction_key(instruction), reply.into());
    }

    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let bytes = std::fs::read(path).map_err(|e| ClientError::Config(format!("reading {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Config(format!("parsing {}: {e}", path.display())))
    }

    pub fn lookup(&self, request: &ModelRequest) -> Result<String, AttemptError> {
        if self.require_image && request.is_text_only() {
            return Ok(self.text_only_reply.clone());
        }
        if let Some(text) = self.by_request.get(request.request_digest.as_str()) {
            return Ok(text.clone());
        }
        if let Some(text) = self.by_instruction.get(&Self::instruction_key(&request.instruction)) {
            return Ok(text.clone());
        }
        match &self.on_miss {
            OnMiss::Reply(text) => Ok(text.clone()),
            OnMiss::Error(msg) => Err(AttemptError::Stub(msg.clone())),
        }
    }
}

pub struct StubBackend {
    fixture: StubFixture,
}

impl StubBackend {
    pub fn new(fixture: StubFixture) -> Self {
        StubBackend { fixture }
    }
}

impl Backend for StubBackend {
    fn name(&self) -> &str {
        "stub"
    }

    fn send(&self, request: &ModelRequest) -> Result<Reply, AttemptError> {
        let text = self.fixture.lookup(request)?;
        Ok(Reply {
            text,
            metadata: json!({"backend": "stub", "images": request.images.len()}),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoding::DecodingConfig;
    use crate::request::ImagePayload;

    #[test]
    fn completion_content_forms() {
        let r = parse_completion(&json!({"choices":[{"message":{"content":"hi"},"finish_reason":"stop"}]})).unwrap();
        assert_eq!(r.text, "hi");
        assert_eq!(r.metadata["finish_reason"], "stop");
        let r = parse_completion(&json!({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]}))
            .unwrap();
        assert_eq!(r.text, "ab");
        assert!(parse_completion(&json!({"error":"x"})).is_err());
    }

    #[test]
    fn stub_gates_on_image() {
        let mut f = StubFixture::new(OnMiss::Reply("prose".into()));
        f.require_image = true;
        f.text_only_reply = "I cannot see a diagram.".into();
        f.insert_instruction("task", "```python\npass\n```");
        let img = ImagePayload::from_bytes(b"\x89PNG\r\n\x1a\nxx".to_vec(), "a.png");
        let with = ModelRequest::new("m", "task", vec![img], DecodingConfig::greedy(), 0);
        let without = ModelRequest::new("m", "task", vec![], DecodingConfig::greedy(), 0);
        assert_eq!(f.lookup(&with).unwrap(), "```python\npass\n```");
        assert_eq!(f.lookup(&without).unwrap(), "I cannot see a diagram.");
        let other = ModelRequest::new("m", "other", vec![], DecodingConfig::greedy(), 0);
        f.require_image = false;
        assert_eq!(f.lookup(&other).unwrap(), "prose");
    }

    #[test]
    fn request_digest_key_wins() {
        let mut f = StubFixture::new(OnMiss::Error("no entry".into()));
        let req = ModelRequest::new("m", "task", vec![], DecodingConfig::greedy(), 0);
        f.insert_instruction("task", "by instruction");
        f.by_request.insert(req.request_digest.to_string(), "by request".into());
        assert_eq!(f.lookup(&req).unwrap(), "by request");
        let miss = ModelRequest::new("m", "nope", vec![], DecodingConfig::greedy(), 0);
        assert_eq!(f.lookup(&miss), Err(AttemptError::Stub("no entry".into())));
    }

    #[test]
    fn retryable_statuses() {
        let st = |status| AttemptError::Status {
            status,
            body: String::new(),
            retry_after: None,
        };
        assert!(st(429).retryable());
        assert!(st(503).retryable());
        assert!(!st(400).retryable());
        assert!(!st(401).retryable());
        assert!(AttemptError::Timeout.retryable());
    }
}

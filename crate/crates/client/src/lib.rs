//! Multimodal model queries: request construction, a chat-completions HTTP
//! transport with retries and rate limiting, an immutable response cache,
//! and a deterministic fixture-backed stub for offline runs.

pub mod backend;
pub mod cache;
pub mod client;
pub mod config;
pub mod decoding;
pub mod limiter;
pub mod request;

use std::path::PathBuf;

use diagbench_core::Digest;

pub use backend::{AttemptError, Backend, HttpBackend, OnMiss, Reply, StubBackend, StubFixture};
pub use cache::{CacheEntry, ResponseCache};
pub use client::{ModelClient, ModelResponse, RetryPolicy};
pub use config::{EndpointConfig, EndpointKind};
pub use decoding::{DecodingConfig, DecodingMode, InvalidDecoding};
pub use request::{build_request, ImagePayload, ModelRequest};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("diagram image {path} unreadable: {reason}")]
    MissingImage { path: PathBuf, reason: String },
    #[error("endpoint rejected credentials (HTTP {status}): {excerpt}")]
    Auth { status: u16, excerpt: String },
    #[error("endpoint error{} after {attempts} attempt(s): {excerpt}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Endpoint {
        status: Option<u16>,
        excerpt: String,
        attempts: u32,
    },
    #[error("endpoint timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("no cached response for request {0}")]
    CacheMiss(Digest),
    #[error("response cache: {0}")]
    Cache(#[source] std::io::Error),
    #[error("endpoint config: {0}")]
    Config(String),
}

impl ClientError {
    fn from_attempt(err: AttemptError, attempts: u32) -> Self {
        match err {
            AttemptError::Status { status, body, .. } => ClientError::Endpoint {
                status: Some(status),
                excerpt: body,
                attempts,
            },
            AttemptError::Timeout => ClientError::Timeout { attempts },
            AttemptError::Transport(msg) | AttemptError::Malformed(msg) | AttemptError::Stub(msg) => {
                ClientError::Endpoint {
                    status: None,
                    excerpt: backend::excerpt(&msg),
                    attempts,
                }
            }
        }
    }
}

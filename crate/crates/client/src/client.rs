use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use diagbench_core::ModelResponseText;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::{AttemptError, Backend, HttpBackend, StubBackend, StubFixture};
use crate::cache::{CacheEntry, ResponseCache};
use crate::config::{EndpointConfig, EndpointKind};
use crate::limiter::{InFlight, TokenBucket};
use crate::request::ModelRequest;
use crate::ClientError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: ModelResponseText,
    /// Seconds; zero for cache hits.
    pub latency: f64,
    pub endpoint_metadata: Value,
    pub cached: bool,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial: Duration,
    pub max: Duration,
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, `attempt` counting from 1.
    pub fn delay(&self, attempt: u32, retry_after: Option<Duration>) -> Duration {
        let exp = self.initial.saturating_mul(1u32 << (attempt - 1).min(20));
        let base = exp.min(self.max);
        match retry_after {
            Some(ra) => ra.min(self.max).max(base),
            None => base,
        }
    }
}

pub struct ModelClient {
    backend: Arc<dyn Backend>,
    cache: Option<ResponseCache>,
    policy: RetryPolicy,
    bucket: TokenBucket,
    in_flight: InFlight,
    /// Cached replies only; a miss is an error.
    offline: bool,
    network_calls: AtomicU64,
}

impl ModelClient {
    pub fn from_config(config: &EndpointConfig, cache: Option<ResponseCache>) -> Result<Self, ClientError> {
        config.validate().map_err(ClientError::Config)?;
        let backend: Arc<dyn Backend> = match config.kind {
            EndpointKind::Http => Arc::new(HttpBackend::new(config)?),
            EndpointKind::Stub => {
                let path = config.stub_fixture.as_ref().expect("validated");
                Arc::new(StubBackend::new(StubFixture::load(path)?))
            }
        };
        Ok(Self::with_backend(backend, config, cache))
    }

    pub fn with_backend(backend: Arc<dyn Backend>, config: &EndpointConfig, cache: Option<ResponseCache>) -> Self {
        ModelClient {
            backend,
            cache,
            policy: RetryPolicy {
                max_attempts: config.max_attempts.max(1),
                initial: Duration::from_millis(config.backoff_initial_ms),
                max: Duration::from_millis(config.backoff_max_ms),
            },
            bucket: TokenBucket::new(config.requests_per_second, config.burst),
            in_flight: InFlight::new(config.max_in_flight),
            offline: false,
            network_calls: AtomicU64::new(0),
        }
    }

    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Attempts sent to the backend so far, cache hits excluded.
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError> {
        let digest = &request.request_digest;
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(digest).map_err(ClientError::Cache)? {
                return Ok(ModelResponse {
                    text: ModelResponseText::new(entry.text),
                    latency: 0.0,
                    endpoint_metadata: entry.endpoint_metadata,
                    cached: true,
                    attempts: 0,
                });
            }
        }
        if self.offline {
            return Err(ClientError::CacheMiss(digest.clone()));
        }

        let started = Instant::now();
        let mut attempt = 0;
        let reply = loop {
            attempt += 1;
            let result = {
                let _slot = self.in_flight.acquire();
                self.bucket.acquire();
                self.network_calls.fetch_add(1, Ordering::SeqCst);
                self.backend.send(request)
            };
            match result {
                Ok(reply) => break reply,
                Err(AttemptError::Status { status, body, .. }) if status == 401 || status == 403 => {
                    return Err(ClientError::Auth { status, excerpt: body });
                }
                Err(err) if err.retryable() && attempt < self.policy.max_attempts => {
                    let retry_after = match &err {
                        AttemptError::Status { retry_after, .. } => *retry_after,
                        _ => None,
                    };
                    let delay = self.policy.delay(attempt, retry_after);
                    tracing::info!(
                        digest = %digest.short(12),
                        attempt,
                        delay_ms = delay.as_millis() as u64,
                        error = ?err,
                        "retrying model request"
                    );
                    std::thread::sleep(delay);
                }
                Err(err) => return Err(ClientError::from_attempt(err, attempt)),
            }
        };
        if attempt > 1 {
            tracing::info!(digest = %digest.short(12), retries = attempt - 1, "model request succeeded after retries");
        }
        let mut metadata = reply.metadata;
        if let Value::Object(map) = &mut metadata {
            map.insert("backend".into(), Value::from(self.backend.name()));
        }
        let text = match &self.cache {
            Some(cache) => {
                let stored = cache
                    .put(&CacheEntry {
                        request_digest: digest.clone(),
                        model_id: request.model_id.clone(),
                        text: reply.text,
                        endpoint_metadata: metadata.clone(),
                    })
                    .map_err(ClientError::Cache)?;
                stored.text
            }
            None => reply.text,
        };
        Ok(ModelResponse {
            text: ModelResponseText::new(text),
            latency: started.elapsed().as_secs_f64(),
            endpoint_metadata: metadata,
            cached: false,
            attempts: attempt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            initial: Duration::from_millis(100),
            max: Duration::from_millis(1000),
        };
        assert_eq!(p.delay(1, None), Duration::from_millis(100));
        assert_eq!(p.delay(2, None), Duration::from_millis(200));
        assert_eq!(p.delay(4, None), Duration::from_millis(800));
        assert_eq!(p.delay(5, None), Duration::from_millis(1000));
        assert_eq!(p.delay(1, Some(Duration::from_millis(700))), Duration::from_millis(700));
        assert_eq!(p.delay(1, Some(Duration::from_secs(60))), Duration::from_millis(1000));
    }
}

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const BASE_URL_ENV: &str = "DIAGBENCH_BASE_URL";
pub const MODEL_ID_ENV: &str = "DIAGBENCH_MODEL_ID";
pub const DEFAULT_API_KEY_ENV: &str = "DIAGBENCH_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    #[default]
    Http,
    Stub,
}

/// Where requests go and how hard to push. Credentials are never stored
/// here, only the name of the variable holding them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    #[serde(default)]
    pub kind: EndpointKind,
    #[serde(default)]
    pub base_url: Option<String>,
    pub model_id: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Fixture file for the stub endpoint.
    #[serde(default)]
    pub stub_fixture: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_initial")]
    pub backoff_initial_ms: u64,
    #[serde(default = "default_backoff_max")]
    pub backoff_max_ms: u64,
    #[serde(default = "default_rate")]
    pub requests_per_second: f64,
    #[serde(default = "default_burst")]
    pub burst: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}
fn default_timeout() -> f64 {
    120.0
}
fn default_attempts() -> u32 {
    5
}
fn default_backoff_initial() -> u64 {
    500
}
fn default_backoff_max() -> u64 {
    30_000
}
fn default_rate() -> f64 {
    2.0
}
fn default_burst() -> u32 {
    4
}
fn default_in_flight() -> usize {
    4
}

impl EndpointConfig {
    pub fn http(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        EndpointConfig {
            kind: EndpointKind::Http,
            base_url: Some(base_url.into()),
            ..Self::stub(PathBuf::new(), model_id)
        }
    }

    pub fn stub(fixture: impl Into<PathBuf>, model_id: impl Into<String>) -> Self {
        EndpointConfig {
            kind: EndpointKind::Stub,
            base_url: None,
            model_id: model_id.into(),
            api_key_env: default_api_key_env(),
            stub_fixture: Some(fixture.into()),
            timeout_seconds: default_timeout(),
            max_attempts: default_attempts(),
            backoff_initial_ms: default_backoff_initial(),
            backoff_max_ms: default_backoff_max(),
            requests_per_second: 1000.0,
            burst: 1000,
            max_in_flight: 64,
        }
    }

    /// Applies `DIAGBENCH_BASE_URL` and `DIAGBENCH_MODEL_ID` when set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(url) = std::env::var(BASE_URL_ENV) {
            if !url.is_empty() {
                self.base_url = Some(url);
            }
        }
        if let Ok(model) = std::env::var(MODEL_ID_ENV) {
            if !model.is_empty() {
                self.model_id = model;
            }
        }
        self
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_seconds.max(0.001))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model_id.trim().is_empty() {
            return Err("model_id is empty".into());
        }
        match self.kind {
            EndpointKind::Http if self.base_url.as_deref().is_none_or(str::is_empty) => {
                return Err("http endpoint needs base_url".into())
            }
            EndpointKind::Stub if self.stub_fixture.is_none() => return Err("stub endpoint needs stub_fixture".into()),
            _ => {}
        }
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        if !(self.requests_per_second > 0.0) || self.burst == 0 || self.max_in_flight == 0 {
            return Err("rate limits must be positive".into());
        }
        if !(self.timeout_seconds > 0.0) {
            return Err("timeout_seconds must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults_fill_in() {
        let c: EndpointConfig = toml::from_str("base_url = \"http://x/v1\"\nmodel_id = \"gpt\"").unwrap();
        assert_eq!(c.kind, EndpointKind::Http);
        assert_eq!(c.api_key_env, "DIAGBENCH_API_KEY");
        assert_eq!(c.max_attempts, 5);
        c.validate().unwrap();
    }

    #[test]
    fn incomplete_configs_rejected() {
        let c: EndpointConfig = toml::from_str("model_id = \"gpt\"").unwrap();
        assert!(c.validate().is_err());
        let c: EndpointConfig = toml::from_str("kind = \"stub\"\nmodel_id = \"gpt\"").unwrap();
        assert!(c.validate().is_err());
        assert!(toml::from_str::<EndpointConfig>("model_id = \"x\"\napi_key = \"secret\"").is_err());
    }
}

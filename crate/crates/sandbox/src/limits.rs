use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NetworkPolicy {
    #[default]
    Denied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceLimits {
    /// Covers compilation and the run together.
    pub wall_clock_seconds: f64,
    pub memory_bytes: u64,
    /// Cap on stdout and stderr combined.
    pub max_output_bytes: u64,
    #[serde(default)]
    pub network: NetworkPolicy,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        ResourceLimits {
            wall_clock_seconds: 30.0,
            memory_bytes: 1 << 30,
            max_output_bytes: 1 << 20,
            network: NetworkPolicy::Denied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid resource limits: {0}")]
pub struct InvalidLimits(pub String);

impl ResourceLimits {
    pub fn validate(&self) -> Result<(), InvalidLimits> {
        if !(self.wall_clock_seconds.is_finite() && self.wall_clock_seconds > 0.0) {
            return Err(InvalidLimits(format!("wall_clock_seconds = {}", self.wall_clock_seconds)));
        }
        if self.memory_bytes == 0 {
            return Err(InvalidLimits("memory_bytes = 0".into()));
        }
        if self.max_output_bytes == 0 {
            return Err(InvalidLimits("max_output_bytes = 0".into()));
        }
        Ok(())
    }

    pub fn with_wall_clock(mut self, seconds: f64) -> Self {
        self.wall_clock_seconds = seconds;
        self
    }

    pub fn wall_clock(&self) -> Duration {
        Duration::from_secs_f64(self.wall_clock_seconds)
    }

    pub fn memory_mb(&self) -> u64 {
        (self.memory_bytes / (1 << 20)).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let l = ResourceLimits::default();
        l.validate().unwrap();
        assert_eq!(l.wall_clock(), Duration::from_secs(30));
        assert_eq!(l.memory_mb(), 1024);
    }

    #[test]
    fn non_positive_values_rejected() {
        assert!(ResourceLimits::default().with_wall_clock(0.0).validate().is_err());
        assert!(ResourceLimits::default().with_wall_clock(f64::NAN).validate().is_err());
        let l = ResourceLimits {
            memory_bytes: 0,
            ..Default::default()
        };
        assert!(l.validate().is_err());
        let l = ResourceLimits {
            max_output_bytes: 0,
            ..Default::default()
        };
        assert!(l.validate().is_err());
    }

    #[test]
    fn network_only_accepts_denied() {
        let ok: ResourceLimits =
            toml::from_str("wall_clock_seconds = 5.0\nmemory_bytes = 1024\nmax_output_bytes = 10\nnetwork = \"denied\"")
                .unwrap();
        assert_eq!(ok.network, NetworkPolicy::Denied);
        let bad = toml::from_str::<ResourceLimits>(
            "wall_clock_seconds = 5.0\nmemory_bytes = 1024\nmax_output_bytes = 10\nnetwork = \"allowed\"",
        );
        assert!(bad.is_err());
    }
}

//! Run configuration file: limits, runtimes, endpoint, renderers and
//! synthesis settings. Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use diagbench_client::EndpointConfig;
use diagbench_render::{CodeRendererConfig, DiagramRendererConfig};
use diagbench_sandbox::{Backend, NetworkPolicy, ResourceLimits, RuntimeTable};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsOverlay {
    pub wall_clock_seconds: Option<f64>,
    pub memory_bytes: Option<u64>,
    pub max_output_bytes: Option<u64>,
    pub network: Option<NetworkPolicy>,
}

impl LimitsOverlay {
    pub fn apply(&self, base: ResourceLimits) -> ResourceLimits {
        ResourceLimits {
            wall_clock_seconds: self.wall_clock_seconds.unwrap_or(base.wall_clock_seconds),
            memory_bytes: self.memory_bytes.unwrap_or(base.memory_bytes),
            max_output_bytes: self.max_output_bytes.unwrap_or(base.max_output_bytes),
            network: self.network.unwrap_or(base.network),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandboxSection {
    pub runtimes: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub reruns: u32,
    pub keep_workspaces: bool,
    pub scratch_root: Option<PathBuf>,
    pub backend: Backend,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RendererSection {
    pub diagram: DiagramRendererConfig,
    pub code: CodeRendererConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub templates: Option<PathBuf>,
    pub placeholder: Option<String>,
    pub workers: Option<usize>,
    pub deferral_phrases: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub limits: LimitsOverlay,
    pub sandbox: SandboxSection,
    pub endpoint: Option<EndpointConfig>,
    pub renderers: RendererSection,
    pub synthesis: SynthesisSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        resolve(&mut cfg.sandbox.runtimes);
        resolve(&mut cfg.sandbox.scratch_root);
        resolve(&mut cfg.synthesis.templates);
        if let Some(ep) = cfg.endpoint.as_mut() {
            resolve(&mut ep.stub_fixture);
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn runtime_table(&self) -> Result<RuntimeTable> {
        match &self.sandbox.runtimes {
            Some(p) => RuntimeTable::from_path(p).with_context(|| format!("loading runtimes {}", p.display())),
            None => Ok(RuntimeTable::builtin()),
        }
    }

    /// Limits from the config, then from a standalone limits file.
    pub fn limits(&self, limits_file: Option<&Path>) -> Result<ResourceLimits> {
        let mut limits = self.limits.apply(ResourceLimits::default());
        if let Some(p) = limits_file {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading limits {}", p.display()))?;
            let overlay: LimitsOverlay = toml::from_str(&text).with_context(|| format!("parsing limits {}", p.display()))?;
            limits = overlay.apply(limits);
        }
        limits.validate()?;
        Ok(limits)
    }
}

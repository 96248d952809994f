use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use diagbench_client::{EndpointConfig, EndpointKind, ModelClient, ResponseCache};
use diagbench_core::{load_benchmark, Benchmark, Digest, Language};
use diagbench_sandbox::{ExecOptions, ResourceLimits, Sandbox, SandboxConfig};
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Model endpoint selection shared by evaluate and synthesize.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Stub fixture answering every request offline.
    #[arg(long, conflicts_with = "endpoint")]
    pub stub: Option<PathBuf>,
    /// TOML endpoint description (base_url, model_id, api_key_env, ...).
    #[arg(long)]
    pub endpoint: Option<PathBuf>,
    #[arg(long)]
    pub model_id: Option<String>,
    /// Response cache directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Serve from the cache only; misses become model errors.
    #[arg(long, requires = "cache_dir")]
    pub offline: bool,
}

pub fn endpoint_config(args: &ModelArgs, cfg: &RunConfig) -> Result<EndpointConfig> {
    let mut ep = if let Some(stub) = &args.stub {
        EndpointConfig::stub(stub.clone(), args.model_id.clone().unwrap_or_else(|| "stub".into()))
    } else if let Some(path) = &args.endpoint {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut ep: EndpointConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(f) = ep.stub_fixture.as_mut() {
            if f.is_relative() {
                *f = path.parent().unwrap_or(Path::new(".")).join(&*f);
            }
        }
        ep
    } else if let Some(ep) = &cfg.endpoint {
        ep.clone()
    } else if let Ok(url) = std::env::var(diagbench_client::config::BASE_URL_ENV) {
        let model = std::env::var(diagbench_client::config::MODEL_ID_ENV).unwrap_or_default();
        EndpointConfig::http(url, model)
    } else {
        bail!(
            "no model endpoint: pass --stub or --endpoint, add [endpoint] to the config, or set {}",
            diagbench_client::config::BASE_URL_ENV
        );
    };
    if ep.kind == EndpointKind::Http {
        ep = ep.with_env_overrides();
    }
    if let Some(id) = &args.model_id {
        ep.model_id = id.clone();
    }
    ep.validate().map_err(anyhow::Error::msg).context("endpoint config")?;
    Ok(ep)
}

/// The parts of an endpoint that can change replies.
pub fn endpoint_identity(ep: &EndpointConfig) -> Result<Value> {
    let fixture = match (&ep.kind, &ep.stub_fixture) {
        (EndpointKind::Stub, Some(p)) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading stub fixture {}", p.display()))?;
            Some(Digest::of(bytes))
        }
        _ => None,
    };
    Ok(json!({
        "kind": ep.kind,
        "base_url": ep.base_url,
        "model_id": ep.model_id,
        "stub_fixture": fixture,
    }))
}

pub fn build_client(ep: &EndpointConfig, args: &ModelArgs) -> Result<ModelClient> {
    let cache = match &args.cache_dir {
        Some(dir) => Some(ResponseCache::open(dir).with_context(|| format!("opening cache {}", dir.display()))?),
        None => None,
    };
    Ok(ModelClient::from_config(ep, cache)?.offline(args.offline))
}

/// A benchmark directory means its `manifest.jsonl`.
pub fn manifest_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(MANIFEST_NAME)
    } else {
        input.to_path_buf()
    }
}

pub fn load(input: &Path) -> Result<Benchmark> {
    let path = manifest_path(input);
    load_benchmark(&path).with_context(|| format!("loading benchmark {}", path.display()))
}

pub fn parse_languages(raw: &[String]) -> Result<Vec<Language>> {
    raw.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Language>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}

pub fn sandbox_config(cfg: &RunConfig, limits: ResourceLimits) -> SandboxConfig {
    SandboxConfig {
        limits,
        concurrency: cfg.sandbox.concurrency,
        reruns: cfg.sandbox.reruns,
        exec: ExecOptions {
            keep_workspace: cfg.sandbox.keep_workspaces,
            backend: cfg.sandbox.backend.clone(),
            scratch_root: cfg.sandbox.scratch_root.clone(),
        },
        ..SandboxConfig::default()
    }
}

pub fn start_sandbox(cfg: &RunConfig, limits: ResourceLimits, languages: &[Language]) -> Result<Sandbox> {
    let table = cfg.runtime_table()?;
    Ok(Sandbox::start_for(sandbox_config(cfg, limits), &table, languages))
}

pub fn tool_versions(sandbox: &Sandbox) -> BTreeMap<String, String> {
    sandbox
        .tool_versions()
        .iter()
        .map(|(l, v)| (l.id().to_string(), v.clone()))
        .collect()
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use diagbench_client::DecodingConfig;
use diagbench_core::digest::DigestBuilder;
use diagbench_core::{Digest, Language};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything that determined a run's outputs. `digest` covers every field
/// except the command line and the timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub digest: Digest,
    pub command: String,
    pub command_line: Vec<String>,
    pub config_digest: Digest,
    pub benchmark_digest: Option<Digest>,
    pub model_id: Option<String>,
    pub decoding: Option<DecodingConfig>,
    pub runtime_digests: BTreeMap<Language, Digest>,
    pub tool_versions: BTreeMap<String, String>,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

pub struct ManifestInputs<'a> {
    pub command: &'a str,
    pub config: &'a serde_json::Value,
    pub benchmark_digest: Option<Digest>,
    pub model_id: Option<String>,
    pub decoding: Option<DecodingConfig>,
    pub runtime_digests: BTreeMap<Language, Digest>,
    pub tool_versions: BTreeMap<String, String>,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn config_digest(config: &serde_json::Value) -> Digest {
    Digest::of(serde_json::to_vec(config).expect("json serializes"))
}

impl RunManifest {
    pub fn new(inputs: ManifestInputs<'_>) -> Self {
        let config_digest = config_digest(inputs.config);
        let mut tool_versions = inputs.tool_versions;
        tool_versions.insert("diagbench".into(), env!("CARGO_PKG_VERSION").into());
        let mut m = RunManifest {
            digest: Digest::of(""),
            command: inputs.command.into(),
            command_line: std::env::args().collect(),
            config_digest,
            benchmark_digest: inputs.benchmark_digest,
            model_id: inputs.model_id,
            decoding: inputs.decoding,
            runtime_digests: inputs.runtime_digests,
            tool_versions,
            started_at: now(),
            finished_at: None,
        };
        m.digest = m.compute_digest();
        m
    }

    pub fn compute_digest(&self) -> Digest {
        let mut b = DigestBuilder::new();
        b.part("run-manifest/1");
        b.part(&self.command);
        b.part(self.config_digest.as_str());
        b.part(self.benchmark_digest.as_ref().map_or("", Digest::as_str));
        b.part(self.model_id.as_deref().unwrap_or(""));
        b.part(json(&self.decoding));
        b.part(json(&self.runtime_digests));
        b.part(json(&self.tool_versions));
        b.finish()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
    }
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("json serializes")
}

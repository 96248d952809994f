//! Per-language runtime descriptions and the config table they load from.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use diagbench_core::{Digest, HarnessKind, Language};
use serde::{Deserialize, Serialize};

const BUILTIN_RUNTIMES: &str = include_str!("../../../config/runtimes.toml");

/// How the run step's memory cap is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryEnforcement {
    /// `RLIMIT_AS`.
    AddressSpace,
    /// `RLIMIT_DATA`.
    Data,
    /// No rlimit; the command template is expected to carry its own cap
    /// (e.g. a JVM `-Xmx{memory_mb}m`).
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionProbe {
    pub argv: Vec<String>,
    /// Substring the probe's combined output must contain.
    pub expect: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeSpec {
    pub language: Language,
    pub harnesses: Vec<HarnessKind>,
    pub candidate_filename: String,
    pub entry_filename: String,
    #[serde(default)]
    pub appended_template: Option<String>,
    #[serde(default)]
    pub driver_template: Option<String>,
    #[serde(default)]
    pub compile: Option<Vec<String>>,
    pub run: Vec<String>,
    #[serde(default)]
    pub assertion_signatures: Vec<String>,
    pub memory: MemoryEnforcement,
    pub version_probe: VersionProbe,
}

impl RuntimeSpec {
    pub fn supports(&self, kind: HarnessKind) -> bool {
        self.harnesses.contains(&kind)
    }

    pub fn digest(&self) -> Digest {
        Digest::of_json(self)
    }

    /// Names the candidate file, filling `{public_class}` from the source.
    pub fn candidate_path(&self, candidate: &str) -> String {
        if self.candidate_filename.contains("{public_class}") {
            let class = public_type_name(candidate).unwrap_or("Solution");
            fill(&self.candidate_filename, &[("public_class", class)])
        } else {
            self.candidate_filename.clone()
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.run.is_empty() {
            return Err(format!("{}: run command is empty", self.language));
        }
        if self.harnesses.is_empty() {
            return Err(format!("{}: no harness kinds", self.language));
        }
        for kind in &self.harnesses {
            let template = match kind {
                HarnessKind::AppendedAssertions => &self.appended_template,
                HarnessKind::MainDriver => &self.driver_template,
            };
            if template.is_none() {
                return Err(format!("{}: {kind} listed without its template", self.language));
            }
        }
        if self.version_probe.argv.is_empty() || self.version_probe.expect.is_empty() {
            return Err(format!("{}: version probe incomplete", self.language));
        }
        Ok(())
    }
}

/// First `public class|interface|enum|record X` in Java-like source.
pub fn public_type_name(source: &str) -> Option<&str> {
    const KINDS: [&str; 4] = ["class", "interface", "enum", "record"];
    const MODIFIERS: [&str; 5] = ["final", "abstract", "sealed", "static", "strictfp"];
    let tokens: Vec<&str> = source
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .filter(|t| !t.is_empty())
        .collect();
    for (i, tok) in tokens.iter().enumerate() {
        if *tok != "public" {
            continue;
        }
        let mut j = i + 1;
        while j < tokens.len() && MODIFIERS.contains(&tokens[j]) {
            j += 1;
        }
        if j + 1 < tokens.len() && KINDS.contains(&tokens[j]) {
            return Some(tokens[j + 1]);
        }
    }
    None
}

/// Replaces `{name}` placeholders in one left-to-right pass over `template`.
/// Unknown `{...}` sequences (ordinary braces in code) are copied verbatim,
/// and substituted values are never rescanned.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        for (name, value) in vars {
            let key_len = name.len() + 2;
            if tail.len() >= key_len && tail.as_bytes()[key_len - 1] == b'}' && &tail[1..key_len - 1] == *name {
                out.push_str(value);
                rest = &tail[key_len..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeConfigError {
    #[error("reading runtime table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing runtime table: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("runtime table: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
struct RuntimeFile {
    version: String,
    runtime: Vec<RuntimeSpec>,
}

/// Exactly one spec per language.
#[derive(Debug, Clone)]
pub struct RuntimeTable {
    pub version: String,
    specs: BTreeMap<Language, RuntimeSpec>,
}

impl RuntimeTable {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_RUNTIMES).expect("built-in runtime table is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, RuntimeConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| RuntimeConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, RuntimeConfigError> {
        let file: RuntimeFile = toml::from_str(text)?;
        let mut specs = BTreeMap::new();
        for spec in file.runtime {
            spec.check().map_err(RuntimeConfigError::Invalid)?;
            let lang = spec.language;
            if specs.insert(lang, spec).is_some() {
                return Err(RuntimeConfigError::Invalid(format!("{lang} configured twice")));
            }
        }
        Ok(RuntimeTable {
            version: file.version,
            specs,
        })
    }

    pub fn get(&self, lang: Language) -> Option<&RuntimeSpec> {
        self.specs.get(&lang)
    }

    pub fn languages(&self) -> impl Iterator<Item = Language> + '_ {
        self.specs.keys().copied()
    }

    pub fn specs(&self) -> impl Iterator<Item = &RuntimeSpec> {
        self.specs.values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeOutcome {
    /// The line of probe output containing the pinned version.
    Pinned(String),
    Unavailable(String),
}

const PROBE_TIMEOUT: Duration = Duration::from_secs(30);

/// Runs a version probe and checks its output for the pinned substring.
pub fn probe(spec: &VersionProbe, env: &[(String, String)]) -> ProbeOutcome {
    let mut cmd = Command::new(&spec.argv[0]);
    cmd.args(&spec.argv[1..])
        .env_clear()
        .envs(env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return ProbeOutcome::Unavailable(format!("{}: {e}", spec.argv[0])),
    };
    let mut out_pipe = child.stdout.take().expect("piped");
    let mut err_pipe = child.stderr.take().expect("piped");
    let out_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = out_pipe.read_to_end(&mut buf);
        buf
    });
    let err_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = err_pipe.read_to_end(&mut buf);
        buf
    });
    let start = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if start.elapsed() > PROBE_TIMEOUT => {
                let _ = child.kill();
                let _ = child.wait();
                return ProbeOutcome::Unavailable(format!("{} timed out", spec.argv[0]));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return ProbeOutcome::Unavailable(e.to_string()),
        }
    }
    let mut text = String::from_utf8_lossy(&out_thread.join().unwrap_or_default()).into_owned();
    text.push('\n');
    text.push_str(&String::from_utf8_lossy(&err_thread.join().unwrap_or_default()));
    match text.lines().find(|l| l.contains(&spec.expect)) {
        Some(line) => ProbeOutcome::Pinned(line.trim().to_string()),
        None => {
            let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("<no output>");
            ProbeOutcome::Unavailable(format!("version drift: expected {:?}, got {first:?}", spec.expect))
        }
    }
}

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};

use diagbench_core::extraction::{extract_code_for, ReasoningMarkers};
use diagbench_core::{BenchmarkProblem, Digest, Language, LanguageRegistry, ModelResponseText, Origin};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assemble::{assemble_program, AssembleError, SourceSet};
use crate::exec::{execute, ExecOptions, ExecutionReport, ExitStatus, Verdict};
use crate::limits::ResourceLimits;
use crate::runtime::{probe, ProbeOutcome, RuntimeSpec, RuntimeTable};

#[derive(Debug, Clone)]
#[derive(Default)]
pub struct SandboxConfig {
    pub limits: ResourceLimits,
    /// Concurrent executions; the CPU count when unset.
    pub concurrency: Option<usize>,
    /// Extra runs per execution for flakiness detection.
    pub reruns: u32,
    pub exec: ExecOptions,
    pub markers: ReasoningMarkers,
}


impl SandboxConfig {
    pub fn concurrency(&self) -> usize {
        self.concurrency
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SandboxError {
    #[error("runtime for {language} unavailable: {reason}")]
    RuntimeUnavailable { language: Language, reason: String },
    #[error(transparent)]
    Assemble(#[from] AssembleError),
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Outcome of judging one model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    /// 1 iff the verdict is Pass.
    pub r: u8,
    pub report: ExecutionReport,
    pub origin: Option<Origin>,
    pub fence_info: Option<String>,
    pub reason: Option<String>,
}

impl Judgement {
    pub fn is_infra(&self) -> bool {
        self.report.verdict == Verdict::Infra
    }
}

/// Probed runtimes plus a bounded execution pool. Safe to share across
/// threads.
pub struct Sandbox {
    config: SandboxConfig,
    runtimes: BTreeMap<Language, RuntimeSpec>,
    versions: BTreeMap<Language, String>,
    unavailable: BTreeMap<Language, String>,
    slots: Slots,
}

impl Sandbox {
    /// Probes every runtime in `table`; languages whose probe fails or
    /// reports another version are disabled.
    pub fn start(config: SandboxConfig, table: &RuntimeTable) -> Self {
        Self::start_for(config, table, &Language::ALL)
    }

    /// Like [`Sandbox::start`], probing only `languages`.
    pub fn start_for(config: SandboxConfig, table: &RuntimeTable, languages: &[Language]) -> Self {
        let env = crate::exec::probe_env();
        let probed: Vec<(Language, Result<(RuntimeSpec, String), String>)> = languages
            .par_iter()
            .map(|&lang| {
                let outcome = match table.get(lang) {
                    None => Err("no runtime configured".to_string()),
                    Some(spec) => match probe(&spec.version_probe, &env) {
                        ProbeOutcome::Pinned(line) => Ok((spec.clone(), line)),
                        ProbeOutcome::Unavailable(reason) => Err(reason),
                    },
                };
                (lang, outcome)
            })
            .collect();
        let mut sandbox = Self::empty(config);
        for (lang, outcome) in probed {
            match outcome {
                Ok((spec, line)) => {
                    tracing::debug!(%lang, version = %line, "runtime pinned");
                    sandbox.runtimes.insert(lang, spec);
                    sandbox.versions.insert(lang, line);
                }
                Err(reason) => {
                    tracing::warn!(%lang, %reason, "runtime unavailable");
                    sandbox.unavailable.insert(lang, reason);
                }
            }
        }
        sandbox
    }

    /// Trusts every runtime in `table` without probing.
    pub fn unprobed(config: SandboxConfig, table: &RuntimeTable) -> Self {
        let mut sandbox = Self::empty(config);
        for spec in table.specs() {
            sandbox.runtimes.insert(spec.language, spec.clone());
        }
        sandbox
    }

    fn empty(config: SandboxConfig) -> Self {
        let n = config.concurrency();
        Sandbox {
            config,
            runtimes: BTreeMap::new(),
            versions: BTreeMap::new(),
            unavailable: BTreeMap::new(),
            slots: Slots {
                free: Mutex::new(n),
                cv: Condvar::new(),
            },
        }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn limits(&self) -> &ResourceLimits {
        &self.config.limits
    }

    pub fn unavailable(&self) -> &BTreeMap<Language, String> {
        &self.unavailable
    }

    /// Version lines reported by the startup probes.
    pub fn tool_versions(&self) -> &BTreeMap<Language, String> {
        &self.versions
    }

    pub fn runtime_digests(&self) -> BTreeMap<Language, Digest> {
        self.runtimes.iter().map(|(l, s)| (*l, s.digest())).collect()
    }

    pub fn runtime(&self, language: Language) -> Result<&RuntimeSpec, SandboxError> {
        self.runtimes.get(&language).ok_or_else(|| SandboxError::RuntimeUnavailable {
            language,
            reason: self
                .unavailable
                .get(&language)
                .cloned()
                .unwrap_or_else(|| "no runtime configured".into()),
        })
    }

    /// Executes assembled sources, waiting for a free slot first.
    pub fn execute(&self, sources: &SourceSet) -> Result<ExecutionReport, SandboxError> {
        self.execute_with(sources, &self.config.limits)
    }

    pub fn execute_with(&self, sources: &SourceSet, limits: &ResourceLimits) -> Result<ExecutionReport, SandboxError> {
        let spec = self.runtime(sources.language)?;
        let _slot = self.slots.acquire();
        let mut report = execute(spec, sources, limits, &self.config.exec);
        for _ in 0..self.config.reruns {
            let again = execute(spec, sources, limits, &self.config.exec);
            if again.passed() != report.passed() {
                tracing::warn!(
                    digest = %sources.digest().short(12),
                    first = %report.verdict,
                    rerun = %again.verdict,
                    "flaky execution"
                );
                report.flaky = true;
            }
        }
        Ok(report)
    }

    /// Runs a candidate source against the problem's tests.
    pub fn run_candidate(&self, problem: &BenchmarkProblem, candidate: &str) -> Result<ExecutionReport, SandboxError> {
        let spec = self.runtime(problem.language)?;
        let sources = assemble_program(problem, candidate, spec)?;
        self.execute(&sources)
    }

    /// Extracts code from the reasoning-stripped response, assembles it with the tests and runs
    /// it. An empty response scores 0 without running anything.
    pub fn judge(&self, problem: &BenchmarkProblem, response: &ModelResponseText) -> Result<Judgement, SandboxError> {
        let spec = self.runtime(problem.language)?;
        let lang_spec = LanguageRegistry::builtin()
            .get(problem.language.id())
            .expect("benchmark languages are registered");
        let code = match extract_code_for(&response.reasoning_stripped, lang_spec) {
            Ok(code) => code,
            Err(e) => {
                return Ok(Judgement {
                    r: 0,
                    report: self.synthesized(spec, "extract", Verdict::WrongAnswer, "EmptyResponse"),
                    origin: None,
                    fence_info: None,
                    reason: Some(format!("EmptyResponse: {e}")),
                })
            }
        };
        let sources = assemble_program(problem, &code.source, spec)?;
        let report = self.execute(&sources)?;
        Ok(Judgement {
            r: u8::from(report.passed()),
            reason: report.note.clone(),
            report,
            origin: Some(code.origin),
            fence_info: code.fence_info,
        })
    }

    /// Judges raw model output using the configured reasoning markers.
    pub fn judge_text(&self, problem: &BenchmarkProblem, raw: &str) -> Result<Judgement, SandboxError> {
        self.judge(problem, &ModelResponseText::with_markers(raw, &self.config.markers))
    }

    fn synthesized(&self, spec: &RuntimeSpec, step: &str, verdict: Verdict, note: &str) -> ExecutionReport {
        ExecutionReport {
            verdict,
            exit_status: ExitStatus::NotRun,
            stdout: String::new(),
            stderr: String::new(),
            wall_time: 0.0,
            workspace_digest: Digest::of(""),
            runtime_digest: spec.digest(),
            limits: self.config.limits.clone(),
            step: step.into(),
            note: Some(note.into()),
            flaky: false,
            workspace: None,
        }
    }
}

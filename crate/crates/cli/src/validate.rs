//! `validate`: canonical solutions must pass their own tests; optional
//! mutants must each fail at least one.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use diagbench_core::benchmark::{filter_problems, ProblemFilter};
use diagbench_core::{Benchmark, Language, ProblemId};
use diagbench_sandbox::{validate_benchmark, Sandbox, SandboxError, ValidationReport, Verdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::{now, ManifestInputs, RunManifest};
use crate::setup;

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Benchmark directory or manifest file.
    pub benchmark: PathBuf,
    /// JSON lines of {concept_id, language, find, replace}.
    #[arg(long)]
    pub mutants: Option<PathBuf>,
    /// Where the validation report goes.
    #[arg(long, default_value = "validation.json")]
    pub report: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long)]
    pub limits: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mutant {
    pub concept_id: u32,
    pub language: Language,
    pub find: String,
    pub replace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutantOutcome {
    #[serde(flatten)]
    pub mutant: Mutant,
    /// None when the mutant could not be run.
    pub verdict: Option<Verdict>,
    pub killed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationFile {
    pub manifest: RunManifest,
    pub report: ValidationReport,
    #[serde(default)]
    pub mutants: Vec<MutantOutcome>,
    pub exit_code: i32,
}

pub fn load_mutants(path: &Path) -> Result<Vec<Mutant>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

/// Applies each mutant to its canonical solution and runs the tests.
pub fn run_mutants(sandbox: &Sandbox, bench: &Benchmark, mutants: &[Mutant]) -> Result<Vec<MutantOutcome>> {
    let mut prepared = Vec::new();
    for m in mutants {
        let id = ProblemId {
            concept_id: m.concept_id,
            language: m.language,
        };
        let Some(problem) = bench.get(id) else {
            bail!("mutant targets {id}, which is not in the benchmark");
        };
        let hits = problem.canonical_solution.matches(&m.find).count();
        if hits != 1 {
            bail!("mutant for {id}: `{}` occurs {hits} times in the canonical solution, expected once", m.find);
        }
        prepared.push((m, problem, problem.canonical_solution.replacen(&m.find, &m.replace, 1)));
    }
    Ok(prepared
        .par_iter()
        .map(|(m, problem, source)| match sandbox.run_candidate(problem, source) {
            Ok(report) => MutantOutcome {
                mutant: (*m).clone(),
                verdict: Some(report.verdict),
                killed: !report.passed() && report.verdict != Verdict::Infra,
                reason: report.note.clone(),
            },
            Err(e) => MutantOutcome {
                mutant: (*m).clone(),
                verdict: match e {
                    SandboxError::Assemble(_) => Some(Verdict::CompileError),
                    SandboxError::RuntimeUnavailable { .. } => None,
                },
                killed: matches!(e, SandboxError::Assemble(_)),
                reason: Some(e.to_string()),
            },
        })
        .collect())
}

pub fn run(args: &ValidateArgs, cfg: &RunConfig) -> Result<i32> {
    let full = setup::load(&args.benchmark)?;
    let filter = ProblemFilter {
        languages: setup::parse_languages(&args.languages)?.into_iter().collect(),
        ..ProblemFilter::default()
    };
    let bench = filter_problems(&full, &filter);
    let mutants = match &args.mutants {
        Some(p) => load_mutants(p)?,
        None => Vec::new(),
    };
    let limits = cfg.limits(args.limits.as_deref())?;
    let sandbox = setup::start_sandbox(cfg, limits.clone(), &bench.languages())?;
    let config = serde_json::json!({"limits": limits, "backend": cfg.sandbox.backend, "filter": filter.languages});
    let mut manifest = RunManifest::new(ManifestInputs {
        command: "validate",
        config: &config,
        benchmark_digest: Some(bench.source_digest.clone()),
        model_id: None,
        decoding: None,
        runtime_digests: sandbox.runtime_digests(),
        tool_versions: setup::tool_versions(&sandbox),
    });

    let report = validate_benchmark(&sandbox, &bench);
    let outcomes = run_mutants(&sandbox, &bench, &mutants)?;

    for (lang, reason) in &report.unavailable {
        println!("UNAVAILABLE {lang}: {reason}");
    }
    for d in report.failures() {
        let verdict = d.verdict.map_or("-", Verdict::as_str);
        println!("FAIL {} {verdict}: {}", d.id, d.reason.as_deref().unwrap_or(""));
    }
    let available = report.total - report.environment_errors().count();
    println!(
        "canonical solutions: {}/{} passed ({} not run)",
        report.passed,
        report.total,
        report.total - available
    );
    for o in &outcomes {
        let id = ProblemId {
            concept_id: o.mutant.concept_id,
            language: o.mutant.language,
        };
        let state = match (o.killed, o.verdict) {
            (true, Some(v)) => format!("killed ({v})"),
            (false, None) => "not run".to_string(),
            _ => "SURVIVED".to_string(),
        };
        println!("mutant {id} `{}` -> `{}`: {state}", o.mutant.find, o.mutant.replace);
    }
    if !outcomes.is_empty() {
        println!("mutants killed: {}/{}", outcomes.iter().filter(|o| o.killed).count(), outcomes.len());
    }

    let survived = outcomes.iter().any(|o| !o.killed && o.verdict.is_some_and(|v| v != Verdict::Infra));
    let unrun = outcomes.iter().any(|o| !o.killed && !o.verdict.is_some_and(|v| v != Verdict::Infra));
    let mut code = report.exit_code();
    if code == 0 && survived {
        code = 1;
    } else if code == 0 && unrun {
        code = 2;
    }
    manifest.finished_at = Some(now());
    let file = ValidationFile {
        manifest,
        report,
        mutants: outcomes,
        exit_code: code,
    };
    if let Some(parent) = args.report.parent().filter(|p| !p.as_os_str().is_empty()) {
        setup::create_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(&args.report, text).with_context(|| format!("writing {}", args.report.display()))?;
    Ok(code)
}

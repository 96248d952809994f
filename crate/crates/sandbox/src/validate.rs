use std::collections::BTreeMap;

use diagbench_core::{Benchmark, Language, ProblemId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::Verdict;
use crate::judge::{Sandbox, SandboxError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationDetail {
    pub id: ProblemId,
    /// None when the problem could not be run at all.
    pub verdict: Option<Verdict>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub stderr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub total: usize,
    pub passed: usize,
    pub details: Vec<ValidationDetail>,
    pub unavailable: BTreeMap<Language, String>,
}

impl ValidationReport {
    /// Problems whose canonical solution ran and did not pass.
    pub fn failures(&self) -> impl Iterator<Item = &ValidationDetail> {
        self.details
            .iter()
            .filter(|d| !d.passed && d.verdict.is_some() && d.verdict != Some(Verdict::Infra))
    }

    /// Problems that could not be judged for environmental reasons.
    pub fn environment_errors(&self) -> impl Iterator<Item = &ValidationDetail> {
        self.details
            .iter()
            .filter(|d| d.verdict.is_none() || d.verdict == Some(Verdict::Infra))
    }

    /// 0 clean, 1 any canonical failure, 2 environment problems only.
    pub fn exit_code(&self) -> i32 {
        if self.failures().next().is_some() {
            1
        } else if self.environment_errors().next().is_some() {
            2
        } else {
            0
        }
    }
}

/// Runs every canonical solution against its own tests.
pub fn validate_benchmark(sandbox: &Sandbox, benchmark: &Benchmark) -> ValidationReport {
    let mut details: Vec<ValidationDetail> = benchmark
        .problems
        .par_iter()
        .map(|p| match sandbox.run_candidate(p, &p.canonical_solution) {
            Ok(report) => ValidationDetail {
                id: p.id(),
                verdict: Some(report.verdict),
                passed: report.passed(),
                reason: report.note.clone(),
                wall_time: report.wall_time,
                stderr: if report.passed() { String::new() } else { tail(&report.stderr, 2000) },
            },
            Err(e) => ValidationDetail {
                id: p.id(),
                verdict: match e {
                    SandboxError::Assemble(_) => Some(Verdict::CompileError),
                    SandboxError::RuntimeUnavailable { .. } => None,
                },
                passed: false,
                reason: Some(e.to_string()),
                wall_time: 0.0,
                stderr: String::new(),
            },
        })
        .collect();
    details.sort_by_key(|d| d.id);
    let passed = details.iter().filter(|d| d.passed).count();
    let mut unavailable = BTreeMap::new();
    for lang in benchmark.languages() {
        if let Err(SandboxError::RuntimeUnavailable { reason, .. }) = sandbox.runtime(lang) {
            unavailable.insert(lang, reason);
        }
    }
    ValidationReport {
        ok: passed == details.len(),
        total: details.len(),
        passed,
        details,
        unavailable,
    }
}

fn tail(s: &str, max: usize) -> String {
    if s.len() <= max {
        return s.to_string();
    }
    let mut start = s.len() - max;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    s[start..].to_string()
}

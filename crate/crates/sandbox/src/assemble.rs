//! Textual assembly of candidate code and test cases into runnable files.

use diagbench_core::digest::DigestBuilder;
use diagbench_core::{BenchmarkProblem, Digest, HarnessKind, Language, TestSuite};
use serde::{Deserialize, Serialize};

use crate::runtime::{fill, RuntimeSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub name: String,
    pub contents: String,
}

/// Files to write into a workspace, candidate first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSet {
    pub language: Language,
    pub files: Vec<SourceFile>,
    pub entry: String,
    pub expected_stdout: Option<String>,
}

impl SourceSet {
    /// Hash of the (name, contents) pairs in name order.
    pub fn digest(&self) -> Digest {
        let mut files: Vec<&SourceFile> = self.files.iter().collect();
        files.sort_by(|a, b| a.name.cmp(&b.name));
        let mut b = DigestBuilder::new();
        for f in files {
            b.part(f.name.as_bytes());
            b.part(f.contents.as_bytes());
        }
        b.finish()
    }

    pub fn entry_file(&self) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.name == self.entry)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssembleError {
    #[error("{language} has no {kind} harness configured")]
    UnsupportedHarness { kind: HarnessKind, language: Language },
    #[error("candidate source is empty")]
    EmptyCandidate,
}

pub fn assemble_program(problem: &BenchmarkProblem, candidate: &str, spec: &RuntimeSpec) -> Result<SourceSet, AssembleError> {
    assemble_sources(problem.language, &problem.tests, candidate, spec)
}

pub fn assemble_sources(
    language: Language,
    tests: &TestSuite,
    candidate: &str,
    spec: &RuntimeSpec,
) -> Result<SourceSet, AssembleError> {
    if candidate.trim().is_empty() {
        return Err(AssembleError::EmptyCandidate);
    }
    let kind = tests.harness_kind;
    let template = match kind {
        HarnessKind::AppendedAssertions => spec.appended_template.as_deref(),
        HarnessKind::MainDriver => spec.driver_template.as_deref(),
    };
    let template = match template {
        Some(t) if spec.language == language && spec.supports(kind) => t,
        _ => return Err(AssembleError::UnsupportedHarness { kind, language }),
    };
    let candidate = candidate.trim_end_matches(['\n', '\r']);
    let cases = tests.cases.join("\n");
    let files = match kind {
        HarnessKind::AppendedAssertions => vec![SourceFile {
            name: spec.entry_filename.clone(),
            contents: fill(template, &[("candidate", candidate), ("cases", &cases)]),
        }],
        HarnessKind::MainDriver => vec![
            SourceFile {
                name: spec.candidate_path(candidate),
                contents: format!("{candidate}\n"),
            },
            SourceFile {
                name: spec.entry_filename.clone(),
                contents: fill(template, &[("candidate", candidate), ("cases", &cases)]),
            },
        ],
    };
    Ok(SourceSet {
        language,
        files,
        entry: spec.entry_filename.clone(),
        expected_stdout: tests.expected_stdout.clone(),
    })
}

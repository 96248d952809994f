//! Line-delimited result records and their conversion to score tallies.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use diagbench_core::benchmark::Category;
use diagbench_core::{Digest, Language, Origin, ProblemId, ProblemTally, SampleOutcome};
use diagbench_sandbox::{ExecutionReport, Verdict};
use serde::{Deserialize, Serialize};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const ERRORS_FILE: &str = "errors.jsonl";

/// Deterministic outcome of one (problem, sample).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub manifest_digest: Digest,
    pub benchmark_digest: Digest,
    pub problem: String,
    pub concept_id: u32,
    pub language: Language,
    pub category: Category,
    pub sample_index: u32,
    pub request_digest: Digest,
    pub r: u8,
    pub verdict: Verdict,
    pub origin: Option<Origin>,
    pub fence_info: Option<String>,
    pub reason: Option<String>,
    pub flaky: bool,
}

impl ResultRecord {
    pub fn id(&self) -> ProblemId {
        ProblemId {
            concept_id: self.concept_id,
            language: self.language,
        }
    }

    pub fn outcome(&self) -> SampleOutcome {
        if self.verdict == Verdict::Infra {
            SampleOutcome::Infra
        } else if self.r == 1 {
            SampleOutcome::Pass
        } else {
            SampleOutcome::Fail
        }
    }
}

/// Timing and execution detail kept beside the result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRecord {
    pub problem: String,
    pub sample_index: u32,
    pub request_digest: Digest,
    pub cached: bool,
    pub attempts: u32,
    pub latency: f64,
    /// None when the candidate never reached execution.
    pub report: Option<ExecutionReport>,
}

/// A sample lost to the model endpoint; retried on the next run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub problem: String,
    pub sample_index: u32,
    pub request_digest: Option<Digest>,
    pub error: String,
}

/// Reads records, ignoring a truncated final line left by an interrupted run.
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("reading {}", path.display()))?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(rec) => out.push(rec),
            Err(_) if Some(i) == last => tracing::warn!("{}: ignoring truncated last line", path.display()),
            Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Accepts either a results file or a run directory holding one.
pub fn results_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(RESULTS_FILE)
    } else {
        input.to_path_buf()
    }
}

pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by_key(|a| (a.id(), a.sample_index));
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?,
        );
        for r in records {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))
}

pub fn tallies(records: &[ResultRecord]) -> Vec<ProblemTally> {
    let mut map: BTreeMap<ProblemId, ProblemTally> = BTreeMap::new();
    for r in records {
        map.entry(r.id())
            .or_insert_with(|| ProblemTally::new(r.id(), r.category))
            .record(r.outcome(), r.reason.clone());
    }
    map.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(concept: u32, sample: u32, r: u8) -> ResultRecord {
        ResultRecord {
            manifest_digest: Digest::of("m"),
            benchmark_digest: Digest::of("b"),
            problem: format!("python/{concept}"),
            concept_id: concept,
            language: Language::Python,
            category: Category::Algorithm,
            sample_index: sample,
            request_digest: Digest::of(format!("{concept}/{sample}")),
            r,
            verdict: if r == 1 { Verdict::Pass } else { Verdict::WrongAnswer },
            origin: Some(Origin::FencedTagged),
            fence_info: Some("python".into()),
            reason: None,
            flaky: false,
        }
    }

    #[test]
    fn truncated_tail_is_skipped_but_corruption_is_not() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RESULTS_FILE);
        write_jsonl(&path, &[rec(1, 0, 1), rec(2, 0, 0)]).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"manifest_dig");
        std::fs::write(&path, &text).unwrap();
        assert_eq!(read_results(&path).unwrap().len(), 2);
        std::fs::write(&path, format!("garbage\n{text}")).unwrap();
        assert!(read_results(&path).is_err());
    }

    #[test]
    fn tallies_group_samples() {
        let t = tallies(&[rec(1, 0, 1), rec(1, 1, 0), rec(2, 0, 0)]);
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].passed, t[0].failed), (1, 1));
    }
}

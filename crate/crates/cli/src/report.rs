//! `report`: one comparison table over several result files.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use diagbench_core::metrics::{aggregate, ScoreTable};
use diagbench_core::Digest;

use crate::evaluate::{ScoresFile, SCORES_JSON};
use crate::results::{read_results, results_path, tallies};
use crate::setup;
use crate::tables::{comparison_text, comparison_tsv, ScoreRow};

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Results files or run directories.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Row labels in input order; defaults to each run's label.
    #[arg(long = "label")]
    pub labels: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub k: u64,
    /// Directory for report.txt, report.tsv and report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct Run {
    pub label: String,
    pub benchmark_digest: Digest,
    pub table: ScoreTable,
}

fn default_label(input: &Path) -> String {
    let dir = if input.is_dir() { Some(input) } else { input.parent() };
    let scores = dir
        .and_then(|d| std::fs::read(d.join(SCORES_JSON)).ok())
        .and_then(|b| serde_json::from_slice::<ScoresFile>(&b).ok());
    if let Some(s) = scores {
        return s.label;
    }
    let name = if input.is_dir() { input.file_name() } else { input.file_stem() };
    name.map_or_else(|| input.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn load_runs(args: &ReportArgs) -> Result<Vec<Run>> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, input) in args.inputs.iter().enumerate() {
        let path = results_path(input);
        let records = read_results(&path)?;
        let Some(first) = records.first() else {
            anyhow::bail!("{} has no results", path.display());
        };
        let digest = first.benchmark_digest.clone();
        if let Some(bad) = records.iter().find(|r| r.benchmark_digest != digest) {
            return Err(mismatch(&path, &digest, &bad.benchmark_digest));
        }
        if let Some(prev) = runs.first() {
            if prev.benchmark_digest != digest {
                return Err(mismatch(&path, &prev.benchmark_digest, &digest));
            }
        }
        let table = aggregate(&tallies(&records), args.k).with_context(|| format!("scoring {}", path.display()))?;
        let label = args.labels.get(i).cloned().unwrap_or_else(|| default_label(input));
        runs.push(Run {
            label,
            benchmark_digest: digest,
            table,
        });
    }
    Ok(runs)
}

fn mismatch(path: &Path, expected: &Digest, found: &Digest) -> anyhow::Error {
    anyhow::anyhow!(
        "DigestMismatch: {} was produced on benchmark {}, expected {}",
        path.display(),
        found.short(12),
        expected.short(12)
    )
}

pub fn run(args: &ReportArgs) -> Result<i32> {
    let runs = load_runs(args)?;
    let rows: Vec<ScoreRow<'_>> = runs
        .iter()
        .map(|r| ScoreRow {
            label: r.label.clone(),
            table: &r.table,
        })
        .collect();
    let text = comparison_text(&rows);
    print!("{text}");
    if let Some(out) = &args.out {
        setup::create_dir(out)?;
        std::fs::write(out.join("report.txt"), &text)?;
        std::fs::write(out.join("report.tsv"), comparison_tsv(&rows))?;
        let json: Vec<serde_json::Value> = runs
            .iter()
            .map(|r| {
                serde_json::json!({
                    "label": r.label,
                    "benchmark_digest": r.benchmark_digest,
                    "table": r.table,
                    "display": crate::evaluate::display_values(&r.table),
                })
            })
            .collect();
        std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&json)? + "\n")?;
    }
    Ok(0)
}

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::process::{Command, Stdio};

use diagbench_core::Benchmark;
use serde::{Deserialize, Serialize};

use crate::stage::StageDataset;
use crate::types::Record;
use crate::SynthError;

pub trait Tokenizer: Send + Sync {
    fn name(&self) -> String;
    fn count_batch(&self, texts: &[&str]) -> Result<Vec<usize>, SynthError>;
}

/// Whitespace-separated word count; a rough offline stand-in.
#[derive(Debug, Default, Clone, Copy)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> String {
        "whitespace".into()
    }

    fn count_batch(&self, texts: &[&str]) -> Result<Vec<usize>, SynthError> {
        Ok(texts.iter().map(|t| t.split_whitespace().count()).collect())
    }
}

/// External tokenizer: reads a JSON array of strings on stdin and prints a
/// JSON array of token counts.
#[derive(Debug, Clone)]
pub struct CommandTokenizer {
    pub argv: Vec<String>,
}

impl Tokenizer for CommandTokenizer {
    fn name(&self) -> String {
        self.argv.join(" ")
    }

    fn count_batch(&self, texts: &[&str]) -> Result<Vec<usize>, SynthError> {
        let (program, args) = self
            .argv
            .split_first()
            .ok_or_else(|| SynthError::Environment("empty tokenizer command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SynthError::Environment(format!("tokenizer {program}: {e}")))?;
        let payload = serde_json::to_vec(texts).expect("strings serialize");
        let mut stdin = child.stdin.take().expect("piped");
        let writer = std::thread::spawn(move || stdin.write_all(&payload));
        let output = child
            .wait_with_output()
            .map_err(|e| SynthError::Environment(format!("tokenizer {program}: {e}")))?;
        let _ = writer.join();
        if !output.status.success() {
            return Err(SynthError::Environment(format!(
                "tokenizer {program} failed: {}",
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let counts: Vec<usize> = serde_json::from_slice(&output.stdout)
            .map_err(|e| SynthError::Environment(format!("tokenizer {program} output: {e}")))?;
        if counts.len() != texts.len() {
            return Err(SynthError::Environment(format!(
                "tokenizer {program} returned {} counts for {} texts",
                counts.len(),
                texts.len()
            )));
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl LengthStats {
    fn of(values: &[usize]) -> Option<Self> {
        let min = *values.iter().min()?;
        let max = *values.iter().max()?;
        let mean = values.iter().sum::<usize>() as f64 / values.len() as f64;
        Some(LengthStats { min, max, mean })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extent {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub tokenizer: String,
    pub problem: LengthStats,
    pub response: LengthStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub source: String,
    pub records: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_kind: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_language: BTreeMap<String, usize>,
    /// Distinct image files.
    pub images: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_width: Option<Extent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_height: Option<Extent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<TokenStats>,
}

pub enum StatsSource<'a> {
    Dataset(&'a StageDataset),
    Benchmark(&'a Benchmark),
}

pub fn compute_stats(source: StatsSource<'_>, tokenizer: Option<&dyn Tokenizer>) -> Result<StatsReport, SynthError> {
    let mut by_kind = BTreeMap::new();
    let mut by_language = BTreeMap::new();
    let mut images: BTreeMap<String, (u32, u32)> = BTreeMap::new();
    let mut problems: Vec<&str> = Vec::new();
    let mut responses: Vec<&str> = Vec::new();
    let name = match source {
        StatsSource::Dataset(ds) => {
            for r in &ds.records {
                let kind = match r {
                    Record::CrossModal(_) => "cross-modal",
                    Record::Diagram(_) => "diagram",
                };
                *by_kind.entry(kind.to_string()).or_insert(0) += 1;
                for img in r.images() {
                    images.insert(img.path.to_string_lossy().into_owned(), (img.width, img.height));
                }
                let (p, a) = r.texts();
                problems.push(p);
                responses.push(a);
            }
            format!("dataset {}", ds.meta.stage)
        }
        StatsSource::Benchmark(b) => {
            for (lang, n) in b.count_by_language() {
                by_language.insert(lang.id().to_string(), n);
            }
            let mut seen = BTreeSet::new();
            for p in &b.problems {
                if seen.insert(p.diagram.resolved.clone()) {
                    images.insert(p.diagram.resolved.to_string_lossy().into_owned(), (p.diagram.width, p.diagram.height));
                }
                problems.push(&p.prompt);
                responses.push(&p.canonical_solution);
            }
            "benchmark".to_string()
        }
    };
    let extent = |f: fn(&(u32, u32)) -> u32| {
        let vals: Vec<u32> = images.values().map(f).collect();
        Some(Extent {
            min: *vals.iter().min()?,
            max: *vals.iter().max()?,
        })
    };
    let tokens = match tokenizer {
        Some(t) if !problems.is_empty() => {
            let p = t.count_batch(&problems)?;
            let r = t.count_batch(&responses)?;
            Some(TokenStats {
                tokenizer: t.name(),
                problem: LengthStats::of(&p).expect("non-empty"),
                response: LengthStats::of(&r).expect("non-empty"),
            })
        }
        _ => None,
    };
    Ok(StatsReport {
        source: name,
        records: problems.len(),
        by_kind,
        by_language,
        images: images.len(),
        image_width: extent(|d| d.0),
        image_height: extent(|d| d.1),
        tokens,
    })
}

impl StatsReport {
    /// Aligned two-column plain text.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![("Source".into(), self.source.clone()), ("Records".into(), self.records.to_string())];
        for (k, v) in &self.by_kind {
            rows.push((format!("  {k}"), v.to_string()));
        }
        for (k, v) in &self.by_language {
            rows.push((format!("  {k}"), v.to_string()));
        }
        rows.push(("Images".into(), self.images.to_string()));
        if let (Some(w), Some(h)) = (self.image_width, self.image_height) {
            rows.push(("Min. width".into(), w.min.to_string()));
            rows.push(("Max. width".into(), w.max.to_string()));
            rows.push(("Min. height".into(), h.min.to_string()));
            rows.push(("Max. height".into(), h.max.to_string()));
        }
        if let Some(t) = &self.tokens {
            rows.push(("Tokenizer".into(), t.tokenizer.clone()));
            for (label, s) in [("problem", t.problem), ("response", t.response)] {
                rows.push((format!("Min. {label} length"), s.min.to_string()));
                rows.push((format!("Max. {label} length"), s.max.to_string()));
                rows.push((format!("Avg. {label} length"), format!("{:.1}", s.mean)));
            }
        }
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
    }
}

use std::path::{Path, PathBuf};

use diagbench_client::DecodingConfig;
use diagbench_core::digest::{Digest, DigestBuilder};
use diagbench_render::{CodeRenderer, DiagramRenderer, RenderOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cross_modal::{make_cross_modal, CrossModal};
use crate::diagram::{
    accepted, diagram_image_path, synth_diagram_step1, synth_diagram_step2, validate_render, ModelHandle,
    PromptTemplates, DEFAULT_DEFERRAL_PHRASES,
};
use crate::types::{
    check_unique, DiagramRecord, Disposition, ImageRef, LogEntry, Mixture, QAPair, Record, Route, Stage,
    DEFAULT_PLACEHOLDER,
};
use crate::{RecordFailure, SynthError};

pub const FORMAT_VERSION: &str = "1";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const REJECTIONS_FILE: &str = "rejections.jsonl";
pub const META_FILE: &str = "dataset.json";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub placeholder: String,
    pub deferral_phrases: Vec<String>,
    pub workers: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            placeholder: DEFAULT_PLACEHOLDER.to_string(),
            deferral_phrases: DEFAULT_DEFERRAL_PHRASES.iter().map(|s| s.to_string()).collect(),
            workers: 4,
        }
    }
}

/// Number of stage-1 inputs sent to diagram synthesis: n/10 rounded half up.
pub fn diagram_share(n: usize) -> usize {
    (n + 5) / 10
}

fn rank_key(seed: u64, id: &str) -> Digest {
    let mut b = DigestBuilder::new();
    b.part("split/1").part(seed.to_le_bytes()).part(id);
    b.finish()
}

/// Stage-1 routes: the `diagram_share` ids with the smallest seeded hash go
/// to diagram synthesis, the rest to cross-modal.
pub fn partition(ids: &[&str], seed: u64) -> Vec<Route> {
    let mut order: Vec<(Digest, usize)> = ids.iter().enumerate().map(|(i, id)| (rank_key(seed, id), i)).collect();
    order.sort();
    let mut routes = vec![Route::CrossModal; ids.len()];
    for &(_, i) in order.iter().take(diagram_share(ids.len())) {
        routes[i] = Route::Diagram;
    }
    routes
}

pub fn partition_digest(stage: Stage, seed: u64, ids: &[&str], routes: &[Route]) -> Digest {
    let mut pairs: Vec<(&str, Route)> = ids.iter().copied().zip(routes.iter().copied()).collect();
    pairs.sort();
    let mut b = DigestBuilder::new();
    b.part("partition/1").part(stage.to_string()).part(seed.to_le_bytes());
    for (id, route) in pairs {
        b.part(id).part(match route {
            Route::CrossModal => "cross-modal",
            Route::Diagram => "diagram",
        });
    }
    b.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: String,
    pub stage: Stage,
    pub seed: u64,
    pub inputs: usize,
    /// Routing before any rejection.
    pub planned: Mixture,
    /// Retained records by kind.
    pub mixture: Mixture,
    pub skipped: usize,
    pub rejected: usize,
    pub partition_digest: Digest,
    pub records_digest: Digest,
    pub placeholder: String,
    pub model_id: String,
    pub decoding: DecodingConfig,
    pub code_renderer: String,
    pub diagram_renderer: String,
    pub templates_digest: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageDataset {
    pub meta: DatasetMeta,
    pub records: Vec<Record>,
    pub log: Vec<LogEntry>,
    pub root: PathBuf,
}

impl StageDataset {
    pub fn rejections(&self) -> impl Iterator<Item = &LogEntry> {
        self.log.iter().filter(|e| e.disposition != Disposition::Retained)
    }
}

enum Outcome {
    Retained(Record),
    Skipped(String),
    Rejected(String),
}

pub struct Synthesizer<'a> {
    pub model: ModelHandle<'a>,
    pub code_renderer: &'a dyn CodeRenderer,
    pub diagram_renderer: &'a dyn DiagramRenderer,
    pub templates: PromptTemplates,
    pub config: SynthConfig,
}

fn file_stem(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(40)
        .collect();
    format!("{safe}-{}", Digest::of(id).short(10))
}

fn remove_images(image_dir: &Path, stem: &str) {
    let prefix = format!("{stem}-");
    if let Ok(entries) = std::fs::read_dir(image_dir) {
        for e in entries.flatten() {
            if e.file_name().to_string_lossy().starts_with(&prefix) {
                let _ = std::fs::remove_file(e.path());
            }
        }
    }
}

impl Synthesizer<'_> {
    /// Routes, synthesizes and writes one stage into `out_dir`.
    pub fn assemble_stage(&self, qas: &[QAPair], stage: Stage, out_dir: &Path) -> Result<StageDataset, SynthError> {
        check_unique(qas)?;
        for qa in qas {
            qa.validate().map_err(SynthError::Input)?;
        }
        if stage == Stage::Stage1 && qas.len() < 10 {
            return Err(SynthError::TooFewInputs(qas.len()));
        }
        let image_dir = out_dir.join(IMAGES_DIR);
        std::fs::create_dir_all(&image_dir).map_err(|e| SynthError::io(&image_dir, e))?;
        let ids: Vec<&str> = qas.iter().map(|q| q.id.as_str()).collect();
        let routes = match stage {
            Stage::Stage1 => partition(&ids, self.config.seed),
            Stage::Stage2 => vec![Route::Diagram; qas.len()],
        };
        let planned = Mixture {
            cross_modal: routes.iter().filter(|r| **r == Route::CrossModal).count(),
            diagram: routes.iter().filter(|r| **r == Route::Diagram).count(),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.max(1))
            .build()
            .map_err(|e| SynthError::Input(format!("worker pool: {e}")))?;
        let outcomes: Vec<Result<Outcome, SynthError>> = pool.install(|| {
            qas.par_iter()
                .zip(routes.par_iter())
                .map(|(qa, route)| self.process(qa, *route, out_dir, &image_dir))
                .collect()
        });

        let mut records = Vec::new();
        let mut log = Vec::with_capacity(qas.len());
        for ((qa, route), outcome) in qas.iter().zip(&routes).zip(outcomes) {
            let (disposition, reason) = match outcome? {
                Outcome::Retained(r) => {
                    records.push(r);
                    (Disposition::Retained, None)
                }
                Outcome::Skipped(why) => (Disposition::Skipped, Some(why)),
                Outcome::Rejected(why) => (Disposition::Rejected, Some(why)),
            };
            if let Some(why) = &reason {
                tracing::info!(id = %qa.id, ?route, ?disposition, reason = %why, "record not retained");
            }
            log.push(LogEntry {
                id: qa.id.clone(),
                route: *route,
                disposition,
                reason,
            });
        }
        let mixture = Mixture {
            cross_modal: records.iter().filter(|r| matches!(r, Record::CrossModal(_))).count(),
            diagram: records.iter().filter(|r| matches!(r, Record::Diagram(_))).count(),
        };
        let warning = (records.is_empty() && !qas.is_empty()).then(|| {
            let msg = format!("all {} inputs were skipped or rejected; dataset is empty", qas.len());
            tracing::warn!("{msg}");
            msg
        });
        let records_text = records_jsonl(&records);
        let meta = DatasetMeta {
            format_version: FORMAT_VERSION.into(),
            stage,
            seed: self.config.seed,
            inputs: qas.len(),
            planned,
            mixture,
            skipped: log.iter().filter(|e| e.disposition == Disposition::Skipped).count(),
            rejected: log.iter().filter(|e| e.disposition == Disposition::Rejected).count(),
            partition_digest: partition_digest(stage, self.config.seed, &ids, &routes),
            records_digest: Digest::of(&records_text),
            placeholder: self.config.placeholder.clone(),
            model_id: self.model.model_id.clone(),
            decoding: self.model.decoding,
            code_renderer: self.code_renderer.version(),
            diagram_renderer: self.diagram_renderer.version(),
            templates_digest: self.templates.digest(),
            warning,
        };
        let ds = StageDataset {
            meta,
            records,
            log,
            root: out_dir.to_path_buf(),
        };
        write_dataset(&ds, &records_text)?;
        Ok(ds)
    }

    fn process(&self, qa: &QAPair, route: Route, root: &Path, image_dir: &Path) -> Result<Outcome, SynthError> {
        let stem = file_stem(&qa.id);
        let result = match route {
            Route::CrossModal => {
                match make_cross_modal(qa, self.code_renderer, &self.config.placeholder, root, image_dir, &stem) {
                    Ok(CrossModal::Record(r)) => Ok(Outcome::Retained(Record::CrossModal(r))),
                    Ok(CrossModal::Skip) => Ok(Outcome::Skipped("Skip: question has no fenced code block".into())),
                    Err(e) => Err(e),
                }
            }
            Route::Diagram => self.diagram_record(qa, root, image_dir, &stem).map(|r| Outcome::Retained(Record::Diagram(r))),
        };
        match result {
            Ok(o) => Ok(o),
            Err(RecordFailure::Reject(why)) => {
                remove_images(image_dir, &stem);
                Ok(Outcome::Rejected(why))
            }
            Err(RecordFailure::Fatal(e)) => Err(e),
        }
    }

    fn diagram_record(&self, qa: &QAPair, root: &Path, image_dir: &Path, stem: &str) -> Result<DiagramRecord, RecordFailure> {
        let code = synth_diagram_step1(qa, &self.model, &self.templates)?;
        let out = diagram_image_path(image_dir, stem);
        let outcome = validate_render(&code, self.diagram_renderer, &out).map_err(RecordFailure::from_render)?;
        let info = accepted(outcome)?;
        let (incomplete_problem, solution) =
            synth_diagram_step2(qa, &code, &self.model, &self.templates, &self.config.deferral_phrases)?;
        Ok(DiagramRecord {
            source_id: qa.id.clone(),
            diagram_code: code,
            diagram_image: ImageRef::from_info(&info, root),
            incomplete_problem,
            solution,
            render_ok: true,
        })
    }
}

fn records_jsonl(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn write_dataset(ds: &StageDataset, records_text: &str) -> Result<(), SynthError> {
    let write = |name: &str, text: &str| {
        let p = ds.root.join(name);
        std::fs::write(&p, text).map_err(|e| SynthError::io(&p, e))
    };
    write(RECORDS_FILE, records_text)?;
    let mut rej = String::new();
    for e in ds.rejections() {
        rej.push_str(&serde_json::to_string(e).expect("log entry serializes"));
        rej.push('\n');
    }
    write(REJECTIONS_FILE, &rej)?;
    let mut meta = serde_json::to_string_pretty(&ds.meta).expect("meta serializes");
    meta.push('\n');
    write(META_FILE, &meta)
}

/// Reads a dataset directory written by `assemble_stage`.
pub fn load_dataset(dir: &Path) -> Result<StageDataset, SynthError> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| SynthError::io(&p, e))
    };
    let meta: DatasetMeta =
        serde_json::from_str(&read(META_FILE)?).map_err(|e| SynthError::Input(format!("{META_FILE}: {e}")))?;
    let records_text = read(RECORDS_FILE)?;
    if Digest::of(&records_text) != meta.records_digest {
        return Err(SynthError::Input(format!("{RECORDS_FILE} does not match records_digest in {META_FILE}")));
    }
    let parse_lines = |text: &str, name: &str| -> Result<Vec<serde_json::Value>, SynthError> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| SynthError::Input(format!("{name} line {}: {e}", i + 1))))
            .collect()
    };
    let records = parse_lines(&records_text, RECORDS_FILE)?
        .into_iter()
        .map(|v| serde_json::from_value(v).map_err(|e| SynthError::Input(format!("{RECORDS_FILE}: {e}"))))
        .collect::<Result<Vec<Record>, _>>()?;
    let mut log: Vec<LogEntry> = parse_lines(&read(REJECTIONS_FILE)?, REJECTIONS_FILE)?
        .into_iter()
        .map(|v| serde_json::from_value(v).map_err(|e| SynthError::Input(format!("{REJECTIONS_FILE}: {e}"))))
        .collect::<Result<_, _>>()?;
    for r in &records {
        log.push(LogEntry {
            id: r.source_id().to_string(),
            route: match r {
                Record::CrossModal(_) => Route::CrossModal,
                Record::Diagram(_) => Route::Diagram,
            },
            disposition: Disposition::Retained,
            reason: None,
        });
    }
    log.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(StageDataset {
        meta,
        records,
        log,
        root: dir.to_path_buf(),
    })
}

/// Re-renders every retained diagram; returns (source id, outcome) pairs.
pub fn revalidate(ds: &StageDataset, renderer: &dyn DiagramRenderer) -> Result<Vec<(String, RenderOutcome)>, SynthError> {
    let scratch = tempfile::tempdir().map_err(|e| SynthError::io(Path::new("tempdir"), e))?;
    ds.records
        .iter()
        .filter_map(|r| match r {
            Record::Diagram(d) => Some(d),
            Record::CrossModal(_) => None,
        })
        .enumerate()
        .map(|(i, d)| {
            let out = scratch.path().join(format!("{i}.png"));
            let outcome = validate_render(&d.diagram_code, renderer, &out).map_err(SynthError::from_render)?;
            Ok((d.source_id.clone(), outcome))
        })
        .collect()
}

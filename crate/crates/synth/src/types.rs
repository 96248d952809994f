use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use diagbench_core::Digest;
use diagbench_render::ImageInfo;
use serde::{Deserialize, Serialize};

use crate::SynthError;

pub const DEFAULT_PLACEHOLDER: &str = "<image>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_hint: Option<String>,
}

impl QAPair {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.question.trim().is_empty() {
            return Err(format!("{}: question is empty", self.id));
        }
        if self.answer.trim().is_empty() {
            return Err(format!("{}: answer is empty", self.id));
        }
        Ok(())
    }
}

/// Reads line-delimited QA pairs; ids must be unique.
pub fn load_qa_pairs(path: &Path) -> Result<Vec<QAPair>, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| SynthError::Input(format!("reading {}: {e}", path.display())))?;
    parse_qa_pairs(&text)
}

pub fn parse_qa_pairs(text: &str) -> Result<Vec<QAPair>, SynthError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let qa: QAPair =
            serde_json::from_str(line).map_err(|e| SynthError::Input(format!("line {}: {e}", i + 1)))?;
        qa.validate().map_err(|e| SynthError::Input(format!("line {}: {e}", i + 1)))?;
        out.push(qa);
    }
    check_unique(&out)?;
    Ok(out)
}

pub(crate) fn check_unique(qas: &[QAPair]) -> Result<(), SynthError> {
    let mut seen = BTreeSet::new();
    for qa in qas {
        if !seen.insert(qa.id.as_str()) {
            return Err(SynthError::DuplicateId(qa.id.clone()));
        }
    }
    Ok(())
}

/// Image stored next to the dataset; `path` is relative to the dataset dir.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub sha256: Digest,
}

impl ImageRef {
    pub fn from_info(info: &ImageInfo, root: &Path) -> Self {
        ImageRef {
            path: info.path.strip_prefix(root).unwrap_or(&info.path).to_path_buf(),
            width: info.width,
            height: info.height,
            sha256: info.sha256.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossModalRecord {
    pub source_id: String,
    pub question_rewritten: String,
    pub images: Vec<ImageRef>,
    pub answer: String,
    pub placeholder: String,
    /// Original fenced blocks, verbatim and in order.
    pub code_blocks: Vec<String>,
}

impl CrossModalRecord {
    pub fn placeholder_count(&self) -> usize {
        self.question_rewritten.matches(&self.placeholder).count()
    }

    /// Puts the original code blocks back in place of the placeholders.
    pub fn reconstruct_question(&self) -> Option<String> {
        let pieces: Vec<&str> = self.question_rewritten.split(&self.placeholder).collect();
        if pieces.len() != self.code_blocks.len() + 1 {
            return None;
        }
        let mut out = String::from(pieces[0]);
        for (block, piece) in self.code_blocks.iter().zip(&pieces[1..]) {
            out.push_str(block);
            out.push_str(piece);
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramRecord {
    pub source_id: String,
    pub diagram_code: String,
    pub diagram_image: ImageRef,
    pub incomplete_problem: String,
    pub solution: String,
    pub render_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Record {
    CrossModal(CrossModalRecord),
    Diagram(DiagramRecord),
}

impl Record {
    pub fn source_id(&self) -> &str {
        match self {
            Record::CrossModal(r) => &r.source_id,
            Record::Diagram(r) => &r.source_id,
        }
    }

    pub fn images(&self) -> Vec<&ImageRef> {
        match self {
            Record::CrossModal(r) => r.images.iter().collect(),
            Record::Diagram(r) => vec![&r.diagram_image],
        }
    }

    /// Problem text and reference response.
    pub fn texts(&self) -> (&str, &str) {
        match self {
            Record::CrossModal(r) => (&r.question_rewritten, &r.answer),
            Record::Diagram(r) => (&r.incomplete_problem, &r.solution),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stage1,
    Stage2,
}

impl std::str::FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "stage1" | "1" => Ok(Stage::Stage1),
            "stage2" | "2" => Ok(Stage::Stage2),
            _ => Err(format!("unknown stage '{s}' (expected stage1 or stage2)")),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    CrossModal,
    Diagram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Retained,
    Skipped,
    Rejected,
}

/// Fate of one input; every input id gets exactly one entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub id: String,
    pub route: Route,
    pub disposition: Disposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mixture {
    pub cross_modal: usize,
    pub diagram: usize,
}

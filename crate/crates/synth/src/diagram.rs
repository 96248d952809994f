use std::path::{Path, PathBuf};

use diagbench_client::{DecodingConfig, ModelClient, ModelRequest};
use diagbench_core::extraction::find_fenced_blocks;
use diagbench_core::digest::{Digest, DigestBuilder};
use diagbench_render::{DiagramRenderer, ImageInfo, RenderError, RenderOutcome};

use crate::types::QAPair;
use crate::{RecordFailure, SynthError};

pub const INCOMPLETE_HEADER: &str = "[Incomplete Problem]";
pub const SOLUTION_HEADER: &str = "[Solution]";

pub const DEFAULT_DEFERRAL_PHRASES: [&str; 2] = ["detailed in the provided diagram", "could be found in the diagram"];

const DIAGRAM_KEYWORDS: [&str; 5] = ["flowchart", "graph", "sequenceDiagram", "classDiagram", "classDiagram-v2"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub step1: String,
    pub step2: String,
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        PromptTemplates {
            step1: include_str!("../../../config/prompts/diagram_step1.txt").to_string(),
            step2: include_str!("../../../config/prompts/diagram_step2.txt").to_string(),
        }
    }

    /// Loads `diagram_step1.txt` and `diagram_step2.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, SynthError> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| SynthError::Input(format!("reading {}: {e}", p.display())))
        };
        Ok(PromptTemplates {
            step1: read("diagram_step1.txt")?,
            step2: read("diagram_step2.txt")?,
        })
    }

    pub fn digest(&self) -> Digest {
        let mut b = DigestBuilder::new();
        b.part("prompt-templates/1").part(&self.step1).part(&self.step2);
        b.finish()
    }

    pub fn step1_prompt(&self, qa: &QAPair) -> String {
        fill(&self.step1, &[("problem", &qa.question), ("solution", &qa.answer)])
    }

    pub fn step2_prompt(&self, qa: &QAPair, diagram_code: &str) -> String {
        fill(
            &self.step2,
            &[("problem", &qa.question), ("solution", &qa.answer), ("mermaid_code", diagram_code)],
        )
    }
}

/// Single-pass `{name}` substitution; substituted text is never rescanned.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = values.iter().find(|(name, _)| {
            after.starts_with(name) && after[name.len()..].starts_with('}')
        });
        match hit {
            Some((name, value)) => {
                out.push_str(value);
                rest = &after[name.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Model handle used by both synthesis steps.
pub struct ModelHandle<'a> {
    pub client: &'a ModelClient,
    pub model_id: String,
    pub decoding: DecodingConfig,
}

impl ModelHandle<'_> {
    fn ask(&self, instruction: String) -> Result<String, RecordFailure> {
        let req = ModelRequest::new(self.model_id.clone(), instruction, Vec::new(), self.decoding, 0);
        let resp = self.client.complete(&req).map_err(RecordFailure::from_client)?;
        Ok(resp.text.reasoning_stripped)
    }
}

/// First block tagged `mermaid`/`mmd`; failing that, the first untagged block
/// whose first line names a diagram type.
pub fn extract_diagram_block(response: &str) -> Option<String> {
    let blocks: Vec<_> = find_fenced_blocks(response)
        .into_iter()
        .filter(|b| !b.content.trim().is_empty())
        .collect();
    let tagged = blocks
        .iter()
        .find(|b| b.tag().eq_ignore_ascii_case("mermaid") || b.tag().eq_ignore_ascii_case("mmd"));
    let chosen = tagged.or_else(|| {
        blocks.iter().find(|b| {
            b.tag().is_empty()
                && b.content
                    .lines()
                    .find(|l| !l.trim().is_empty())
                    .and_then(|l| l.split_whitespace().next())
                    .is_some_and(|w| DIAGRAM_KEYWORDS.contains(&w))
        })
    })?;
    Some(chosen.content.trim_end().to_string())
}

pub fn synth_diagram_step1(qa: &QAPair, model: &ModelHandle<'_>, templates: &PromptTemplates) -> Result<String, RecordFailure> {
    let reply = model.ask(templates.step1_prompt(qa))?;
    extract_diagram_block(&reply).ok_or_else(|| RecordFailure::Reject("NoDiagramBlock: response has no fenced diagram block".into()))
}

/// Accept iff the renderer succeeds and leaves an image with positive size.
pub fn validate_render(diagram_code: &str, renderer: &dyn DiagramRenderer, output: &Path) -> Result<RenderOutcome, RenderError> {
    match renderer.render(diagram_code, output)? {
        RenderOutcome::Accept(info) if info.width > 0 && info.height > 0 => Ok(RenderOutcome::Accept(info)),
        RenderOutcome::Accept(_) => Ok(RenderOutcome::Reject {
            message: "renderer produced an empty image".into(),
        }),
        reject => Ok(reject),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Step2Error {
    #[error("SectionParseError: {0}")]
    SectionParse(String),
    #[error("LintReject: incomplete problem never defers to the diagram")]
    LintReject,
}

fn clean_section(s: &str) -> String {
    s.trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | ':' | '#'))
        .to_string()
}

/// Splits a reply into the text after each literal header.
pub fn parse_sections(reply: &str) -> Result<(String, String), Step2Error> {
    let p = reply
        .find(INCOMPLETE_HEADER)
        .ok_or_else(|| Step2Error::SectionParse(format!("missing {INCOMPLETE_HEADER} header")))?;
    let body = &reply[p + INCOMPLETE_HEADER.len()..];
    let s = body
        .find(SOLUTION_HEADER)
        .ok_or_else(|| Step2Error::SectionParse(format!("missing {SOLUTION_HEADER} header")))?;
    // Drop markup on the header's own line, e.g. `### ` before `[Solution]`.
    let problem_raw = &body[..s];
    let problem_raw = match problem_raw.rfind('\n') {
        Some(nl) if problem_raw[nl..].trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '#')).is_empty() => {
            &problem_raw[..nl]
        }
        _ => problem_raw,
    };
    let problem = clean_section(problem_raw);
    let solution = clean_section(&body[s + SOLUTION_HEADER.len()..]);
    if problem.is_empty() {
        return Err(Step2Error::SectionParse(format!("{INCOMPLETE_HEADER} section is empty")));
    }
    if solution.is_empty() {
        return Err(Step2Error::SectionParse(format!("{SOLUTION_HEADER} section is empty")));
    }
    Ok((problem, solution))
}

pub fn lint_deferral(problem: &str, phrases: &[String]) -> bool {
    let lower = problem.to_lowercase();
    phrases.iter().any(|p| lower.contains(&p.to_lowercase()))
}

pub fn synth_diagram_step2(
    qa: &QAPair,
    diagram_code: &str,
    model: &ModelHandle<'_>,
    templates: &PromptTemplates,
    phrases: &[String],
) -> Result<(String, String), RecordFailure> {
    let reply = model.ask(templates.step2_prompt(qa, diagram_code))?;
    let (problem, solution) = parse_sections(&reply).map_err(|e| RecordFailure::Reject(e.to_string()))?;
    if !lint_deferral(&problem, phrases) {
        return Err(RecordFailure::Reject(Step2Error::LintReject.to_string()));
    }
    Ok((problem, solution))
}

pub(crate) fn diagram_image_path(image_dir: &Path, stem: &str) -> PathBuf {
    image_dir.join(format!("{stem}-diagram.png"))
}

pub(crate) fn accepted(outcome: RenderOutcome) -> Result<ImageInfo, RecordFailure> {
    match outcome {
        RenderOutcome::Accept(info) => Ok(info),
        RenderOutcome::Reject { message } => Err(RecordFailure::Reject(format!("render: {message}"))),
    }
}

use std::path::Path;

use diagbench_core::extraction::find_fenced_blocks;
use diagbench_render::CodeRenderer;

use crate::types::{CrossModalRecord, ImageRef, QAPair};
use crate::RecordFailure;

pub enum CrossModal {
    Record(CrossModalRecord),
    /// The question has no code block to move into an image.
    Skip,
}

/// Renders every closed, non-blank fenced block of the question and swaps
/// each for `placeholder`. Images go to `image_dir/{stem}-code-{i}.png`.
pub fn make_cross_modal(
    qa: &QAPair,
    renderer: &dyn CodeRenderer,
    placeholder: &str,
    root: &Path,
    image_dir: &Path,
    stem: &str,
) -> Result<CrossModal, RecordFailure> {
    let blocks: Vec<_> = find_fenced_blocks(&qa.question)
        .into_iter()
        .filter(|b| b.closed && !b.content.trim().is_empty())
        .collect();
    if blocks.is_empty() {
        return Ok(CrossModal::Skip);
    }
    if qa.question.contains(placeholder) {
        return Err(RecordFailure::Reject(format!(
            "question already contains the placeholder {placeholder:?}"
        )));
    }
    let mut rewritten = String::with_capacity(qa.question.len());
    let mut images = Vec::with_capacity(blocks.len());
    let mut originals = Vec::with_capacity(blocks.len());
    let mut cursor = 0;
    for (i, block) in blocks.iter().enumerate() {
        let hint = match block.tag() {
            "" => qa.language_hint.as_deref(),
            tag => Some(tag),
        };
        let out = image_dir.join(format!("{stem}-code-{i}.png"));
        let info = renderer.render(&block.content, hint, &out).map_err(RecordFailure::from_render)?;
        rewritten.push_str(&qa.question[cursor..block.start]);
        rewritten.push_str(placeholder);
        originals.push(qa.question[block.start..block.end].to_string());
        cursor = block.end;
        images.push(ImageRef::from_info(&info, root));
    }
    rewritten.push_str(&qa.question[cursor..]);
    Ok(CrossModal::Record(CrossModalRecord {
        source_id: qa.id.clone(),
        question_rewritten: rewritten,
        images,
        answer: qa.answer.clone(),
        placeholder: placeholder.to_string(),
        code_blocks: originals,
    }))
}

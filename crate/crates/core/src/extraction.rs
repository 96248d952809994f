//! Pulls candidate source code out of free-form model responses.
//!
//! Selection, applied after reasoning spans are stripped:
//! 1. the first fenced block whose info-string matches the target's aliases;
//! 2. otherwise the last fenced block, whatever its tag;
//! 3. otherwise the whole (trimmed) text.
//!
//! Blocks with blank content are never selected.

use serde::{Deserialize, Serialize};

use crate::language::{Language, LanguageRegistry, LanguageSpec};

/// Delimiter pairs for reasoning spans emitted by thinking models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningMarkers {
    pub pairs: Vec<(String, String)>,
}

impl Default for ReasoningMarkers {
    fn default() -> Self {
        ReasoningMarkers {
            pairs: vec![("<think>".to_string(), "</think>".to_string())],
        }
    }
}

/// Removes every `open … close` span. Unmatched markers stay in place.
///
/// Removal repeats until nothing changes, so the result is a fixed point and
/// the function is idempotent even when a removal splices two marker halves
/// together.
pub fn strip_reasoning_with(raw: &str, markers: &ReasoningMarkers) -> String {
    let mut text = raw.to_string();
    loop {
        let mut changed = false;
        for (open, close) in &markers.pairs {
            if open.is_empty() || close.is_empty() {
                continue;
            }
            let mut from = 0;
            while let Some(rel) = text[from..].find(open.as_str()) {
                let start = from + rel;
                let after_open = start + open.len();
                match text[after_open..].find(close.as_str()) {
                    Some(rel_close) => {
                        let end = after_open + rel_close + close.len();
                        text.replace_range(start..end, "");
                        changed = true;
                        from = start;
                    }
                    None => break,
                }
            }
        }
        if !changed {
            return text;
        }
    }
}

/// [`strip_reasoning_with`] using the default `<think>…</think>` markers.
pub fn strip_reasoning(raw: &str) -> String {
    strip_reasoning_with(raw, &ReasoningMarkers::default())
}

/// A model reply plus its reasoning-free view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponseText {
    pub raw: String,
    pub reasoning_stripped: String,
}

impl ModelResponseText {
    pub fn new(raw: impl Into<String>) -> Self {
        Self::with_markers(raw, &ReasoningMarkers::default())
    }

    pub fn with_markers(raw: impl Into<String>, markers: &ReasoningMarkers) -> Self {
        let raw = raw.into();
        let reasoning_stripped = strip_reasoning_with(&raw, markers);
        ModelResponseText { raw, reasoning_stripped }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    FencedTagged,
    FencedUntagged,
    WholeTextFallback,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::FencedTagged => "fenced-tagged",
            Origin::FencedUntagged => "fenced-untagged",
            Origin::WholeTextFallback => "whole-text-fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedCode {
    pub source: String,
    pub origin: Origin,
    pub fence_info: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractionError {
    #[error("response is empty after removing reasoning spans")]
    EmptyResponse,
}

/// A triple-backtick block located in a larger text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    /// Info-string after the opening backticks, trimmed.
    pub info: String,
    pub content: String,
    /// Byte offset of the opening fence line.
    pub start: usize,
    /// Byte offset just past the closing fence (excluding its line break), or
    /// the end of the text for an unclosed block.
    pub end: usize,
    pub closed: bool,
}

impl FencedBlock {
    /// First word of the info-string, the part compared against aliases.
    pub fn tag(&self) -> &str {
        self.info.split_whitespace().next().unwrap_or("")
    }
}

fn fence_run(line: &str) -> Option<(usize, usize, &str)> {
    let trimmed = line.trim_start_matches([' ', '\t']);
    let indent = line.len() - trimmed.len();
    let ticks = trimmed.bytes().take_while(|&b| b == b'`').count();
    if ticks < 3 {
        return None;
    }
    Some((indent, ticks, &trimmed[ticks..]))
}

/// Finds every fenced block. An opening fence is a line of three or more
/// backticks followed by an info-string without backticks; the block closes
/// at the next line holding only at least as many backticks. An unclosed
/// block runs to the end of the text.
pub fn find_fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut open: Option<(usize, usize, usize, String, Vec<&str>)> = None;

    for line_with_nl in text.split_inclusive('\n') {
        let line = line_with_nl.trim_end_matches(['\n', '\r']);
        let line_start = offset;
        offset += line_with_nl.len();

        match open.as_mut() {
            None => {
                if let Some((indent, ticks, rest)) = fence_run(line) {
                    if !rest.contains('`') {
                        open = Some((line_start, indent, ticks, rest.trim().to_string(), Vec::new()));
                    }
                }
            }
            Some((start, indent, ticks, info, body)) => {
                let closes = fence_run(line)
                    .map(|(_, n, rest)| n >= *ticks && rest.trim().is_empty())
                    .unwrap_or(false);
                if closes {
                    blocks.push(FencedBlock {
                        info: std::mem::take(info),
                        content: dedent(body, *indent),
                        start: *start,
                        end: line_start + line.len(),
                        closed: true,
                    });
                    open = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    if let Some((start, indent, _, info, body)) = open {
        blocks.push(FencedBlock {
            info,
            content: dedent(&body, indent),
            start,
            end: text.len(),
            closed: false,
        });
    }
    blocks
}

fn dedent(lines: &[&str], indent: usize) -> String {
    lines
        .iter()
        .map(|l| {
            let strip = l.bytes().take(indent).take_while(|&b| b == b' ' || b == b'\t').count();
            &l[strip..]
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Extracts code for a benchmark language using the built-in alias table.
pub fn extract_code(response: &ModelResponseText, target: Language) -> Result<ExtractedCode, ExtractionError> {
    let spec = LanguageRegistry::builtin()
        .get(target.id())
        .expect("benchmark languages are registered");
    extract_code_for(&response.reasoning_stripped, spec)
}

/// Applies the selection rule to already-stripped text.
pub fn extract_code_for(text: &str, target: &LanguageSpec) -> Result<ExtractedCode, ExtractionError> {
    if text.trim().is_empty() {
        return Err(ExtractionError::EmptyResponse);
    }
    let blocks: Vec<FencedBlock> = find_fenced_blocks(text)
        .into_iter()
        .filter(|b| !b.content.trim().is_empty())
        .collect();

    if let Some(b) = blocks.iter().find(|b| !b.tag().is_empty() && target.matches_alias(b.tag())) {
        return Ok(ExtractedCode {
            source: b.content.clone(),
            origin: Origin::FencedTagged,
            fence_info: Some(b.info.clone()),
        });
    }
    if let Some(b) = blocks.last() {
        return Ok(ExtractedCode {
            source: b.content.clone(),
            origin: Origin::FencedUntagged,
            fence_info: (!b.info.is_empty()).then(|| b.info.clone()),
        });
    }
    Ok(ExtractedCode {
        source: text.trim().to_string(),
        origin: Origin::WholeTextFallback,
        fence_info: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn extract(raw: &str, lang: Language) -> Result<ExtractedCode, ExtractionError> {
        extract_code(&ModelResponseText::new(raw), lang)
    }

    #[test]
    fn strips_think_span() {
        assert_eq!(
            strip_reasoning("<think>plan</think>```python\nx=1\n```"),
            "```python\nx=1\n```"
        );
        assert_eq!(strip_reasoning("no markers here"), "no markers here");
    }

    #[test]
    fn unmatched_markers_left_intact() {
        assert_eq!(strip_reasoning("a <think> b"), "a <think> b");
        assert_eq!(strip_reasoning("a </think> b"), "a </think> b");
        assert_eq!(strip_reasoning("x<think>1</think>y<think>2"), "xy<think>2");
    }

    #[test]
    fn spliced_markers_reach_fixed_point() {
        let once = strip_reasoning("<thi<think>x</think>nk>a</think>b");
        assert_eq!(once, "b");
        assert_eq!(strip_reasoning(&once), once);
    }

    #[test]
    fn tagged_block_selected() {
        let got = extract("Here:\n```python\nprint(1)\n```", Language::Python).unwrap();
        assert_eq!(got.source, "print(1)");
        assert_eq!(got.origin, Origin::FencedTagged);
        assert_eq!(got.fence_info.as_deref(), Some("python"));
    }

    #[test]
    fn target_tag_beats_position() {
        let raw = "```java\nclass A {}\n```\ntext\n```python\ndef f(): pass\n```\n```python\nsecond\n```";
        let got = extract(raw, Language::Python).unwrap();
        assert_eq!(got.source, "def f(): pass");
        assert_eq!(got.origin, Origin::FencedTagged);
    }

    #[test]
    fn aliases_case_insensitive() {
        let got = extract("```C#\nclass A {}\n```", Language::CSharp).unwrap();
        assert_eq!(got.origin, Origin::FencedTagged);
        let got = extract("```JS\nlet a = 1;\n```", Language::JavaScript).unwrap();
        assert_eq!(got.origin, Origin::FencedTagged);
        let got = extract("```cpp title=\"main\"\nint x;\n```", Language::Cpp).unwrap();
        assert_eq!(got.fence_info.as_deref(), Some("cpp title=\"main\""));
    }

    #[test]
    fn last_block_when_no_tag_matches() {
        let raw = "```\nfirst\n```\n```ruby\nputs 1\n```\n```\nlast\n```";
        let got = extract(raw, Language::Python).unwrap();
        assert_eq!(got.source, "last");
        assert_eq!(got.origin, Origin::FencedUntagged);
        assert_eq!(got.fence_info, None);
    }

    #[test]
    fn prose_falls_back_to_whole_text() {
        let got = extract("  I would use a loop.\n", Language::Ruby).unwrap();
        assert_eq!(got.source, "I would use a loop.");
        assert_eq!(got.origin, Origin::WholeTextFallback);
    }

    #[test]
    fn blank_and_reasoning_only_are_empty() {
        assert!(matches!(extract("   \n", Language::Python), Err(ExtractionError::EmptyResponse)));
        assert!(matches!(
            extract("<think>only thoughts</think>\n", Language::Python),
            Err(ExtractionError::EmptyResponse)
        ));
    }

    #[test]
    fn reasoning_blocks_ignored() {
        let raw = "<think>```python\nwrong()\n```</think>Answer:\n```python\nright()\n```";
        assert_eq!(extract(raw, Language::Python).unwrap().source, "right()");
    }

    #[test]
    fn empty_blocks_skipped() {
        let raw = "```python\n```\n```python\nx = 2\n```";
        assert_eq!(extract(raw, Language::Python).unwrap().source, "x = 2");
    }

    #[test]
    fn unclosed_block_runs_to_end() {
        let blocks = find_fenced_blocks("intro\n```python\na = 1\nb = 2\n");
        assert_eq!(blocks.len(), 1);
        assert!(!blocks[0].closed);
        assert_eq!(blocks[0].content, "a = 1\nb = 2");
    }

    #[test]
    fn spans_cover_fences() {
        let text = "a\n```py\nx\n```\nb";
        let blocks = find_fenced_blocks(text);
        assert_eq!(&text[blocks[0].start..blocks[0].end], "```py\nx\n```");
    }

    #[test]
    fn indented_fence_dedents_body() {
        let text = "1. step\n   ```python\n   def f():\n       return 1\n   ```\n";
        let blocks = find_fenced_blocks(text);
        assert_eq!(blocks[0].content, "def f():\n    return 1");
    }

    #[test]
    fn longer_fences_nest_shorter() {
        let text = "````markdown\n```python\nx\n```\n````";
        let blocks = find_fenced_blocks(text);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].content, "```python\nx\n```");
    }

    #[test]
    fn inline_backticks_are_not_fences() {
        assert!(find_fenced_blocks("use ```x``` inline").is_empty());
    }

    proptest! {
        #[test]
        fn strip_is_idempotent(s in "(<think>|</think>|<th|ink>|a|\n|```){0,24}") {
            let once = strip_reasoning(&s);
            prop_assert_eq!(strip_reasoning(&once), once);
        }

        #[test]
        fn total_on_nonblank(s in "[ -~\n]{1,200}") {
            let resp = ModelResponseText::new(s);
            match extract_code(&resp, Language::Python) {
                Ok(code) => prop_assert!(!code.source.trim().is_empty()),
                Err(ExtractionError::EmptyResponse) => prop_assert!(resp.reasoning_stripped.trim().is_empty()),
            }
        }

        #[test]
        fn strip_yields_subsequence(s in "(<think>|</think>|x|y){0,30}") {
            let stripped = strip_reasoning(&s);
            let mut it = s.chars();
            prop_assert!(stripped.chars().all(|c| it.any(|d| d == c)));
        }
    }
}

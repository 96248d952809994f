//! Built-in syntax highlighter: a small lexer keyed by the language registry
//! entry (keywords, comment markers) drawn with the bitmap font.

use std::path::Path;

use diagbench_core::{LanguageRegistry, LanguageSpec};
use serde::{Deserialize, Serialize};

use crate::canvas::{Canvas, Rgb, GLYPH};
use crate::{CodeRenderer, ImageInfo, RenderError};

const SCALE: u32 = 2;
const PAD: i64 = 16;
const LINE_GAP: i64 = 6;
const TAB: &str = "    ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeTheme {
    #[default]
    Light,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Plain,
    Keyword,
    Comment,
    Str,
    Number,
}

struct Palette {
    background: Rgb,
    plain: Rgb,
    keyword: Rgb,
    comment: Rgb,
    string: Rgb,
    number: Rgb,
}

impl CodeTheme {
    fn palette(self) -> Palette {
        match self {
            CodeTheme::Light => Palette {
                background: [255, 255, 255],
                plain: [36, 41, 46],
                keyword: [0, 92, 197],
                comment: [106, 115, 125],
                string: [3, 47, 98],
                number: [0, 92, 50],
            },
            CodeTheme::Dark => Palette {
                background: [40, 44, 52],
                plain: [220, 223, 228],
                keyword: [198, 120, 221],
                comment: [127, 132, 142],
                string: [152, 195, 121],
                number: [209, 154, 102],
            },
        }
    }
}

/// Splits `code` into lines of (kind, text) runs.
pub fn highlight(code: &str, spec: Option<&LanguageSpec>) -> Vec<Vec<(TokenKind, String)>> {
    let line_comment = spec.and_then(|s| s.line_comment.as_deref());
    let block = spec.and_then(|s| s.block_comment.as_ref());
    let is_keyword = |w: &str| spec.is_some_and(|s| s.keywords.iter().any(|k| k == w));
    let mut lines = Vec::new();
    let mut in_block = false;
    for raw in code.replace("\r\n", "\n").split('\n') {
        let line = raw.replace('\t', TAB);
        let chars: Vec<char> = line.chars().collect();
        let at = |i: usize, s: &str| s.chars().enumerate().all(|(k, c)| chars.get(i + k) == Some(&c));
        let mut runs: Vec<(TokenKind, String)> = Vec::new();
        let mut push = |kind: TokenKind, s: String| match runs.last_mut() {
            Some((k, t)) if *k == kind => t.push_str(&s),
            _ => runs.push((kind, s)),
        };
        let mut i = 0;
        while i < chars.len() {
            if in_block {
                let (_, close) = block.expect("in block implies markers");
                let start = i;
                while i < chars.len() && !at(i, close) {
                    i += 1;
                }
                if i < chars.len() {
                    i += close.chars().count();
                    in_block = false;
                }
                push(TokenKind::Comment, chars[start..i].iter().collect());
                continue;
            }
            let c = chars[i];
            if let Some(lc) = line_comment.filter(|lc| at(i, lc)) {
                let _ = lc;
                push(TokenKind::Comment, chars[i..].iter().collect());
                break;
            }
            if let Some((open, _)) = block.filter(|(open, _)| at(i, open)) {
                in_block = true;
                push(TokenKind::Comment, open.clone());
                i += open.chars().count();
                continue;
            }
            if c == '"' || c == '\'' || c == '`' {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i] != c {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i = (i + 1).min(chars.len());
                push(TokenKind::Str, chars[start..i].iter().collect());
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                    i += 1;
                }
                push(TokenKind::Number, chars[start..i].iter().collect());
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let kind = if is_keyword(&word) { TokenKind::Keyword } else { TokenKind::Plain };
                push(kind, word);
                continue;
            }
            push(TokenKind::Plain, c.to_string());
            i += 1;
        }
        lines.push(runs);
    }
    lines
}

pub struct BuiltinCodeRenderer {
    theme: CodeTheme,
}

impl BuiltinCodeRenderer {
    pub const fn new(theme: CodeTheme) -> Self {
        BuiltinCodeRenderer { theme }
    }

    pub fn render_png(&self, code: &str, language_hint: Option<&str>) -> Result<Vec<u8>, RenderError> {
        let code = code.trim_end();
        if code.trim().is_empty() {
            return Err(RenderError::EmptyInput);
        }
        let spec = language_hint.and_then(|h| LanguageRegistry::builtin().resolve(h));
        let lines = highlight(code, spec);
        let cell = i64::from(GLYPH * SCALE);
        let cols = lines
            .iter()
            .map(|l| l.iter().map(|(_, t)| t.chars().count()).sum::<usize>())
            .max()
            .unwrap_or(0) as i64;
        let line_h = cell + LINE_GAP;
        let width = 2 * PAD + cols.max(1) * cell;
        let height = 2 * PAD + lines.len() as i64 * line_h - LINE_GAP;
        let pal = self.theme.palette();
        let mut canvas = Canvas::new(width as u32, height as u32, pal.background);
        for (row, runs) in lines.iter().enumerate() {
            let y = PAD + row as i64 * line_h;
            let mut x = PAD;
            for (kind, text) in runs {
                let color = match kind {
                    TokenKind::Plain => pal.plain,
                    TokenKind::Keyword => pal.keyword,
                    TokenKind::Comment => pal.comment,
                    TokenKind::Str => pal.string,
                    TokenKind::Number => pal.number,
                };
                canvas.text(x, y, text, SCALE, color);
                x += text.chars().count() as i64 * cell;
            }
        }
        Ok(canvas.encode_png())
    }
}

impl CodeRenderer for BuiltinCodeRenderer {
    fn name(&self) -> &str {
        "builtin-code"
    }

    fn version(&self) -> String {
        format!("builtin-code {} ({:?})", env!("CARGO_PKG_VERSION"), self.theme).to_lowercase()
    }

    fn render(&self, code: &str, language_hint: Option<&str>, output: &Path) -> Result<ImageInfo, RenderError> {
        let png = self.render_png(code, language_hint)?;
        std::fs::write(output, png)?;
        ImageInfo::inspect(output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_keywords_comments_and_strings() {
        let spec = LanguageRegistry::builtin().resolve("python");
        let lines = highlight("def f(x):  # doc\n    return \"a#b\" + 10", spec);
        assert_eq!(lines[0][0], (TokenKind::Keyword, "def".into()));
        assert_eq!(lines[0].last().unwrap(), &(TokenKind::Comment, "# doc".into()));
        assert!(lines[1].contains(&(TokenKind::Str, "\"a#b\"".into())));
        assert!(lines[1].contains(&(TokenKind::Number, "10".into())));
    }

    #[test]
    fn block_comments_span_lines() {
        let spec = LanguageRegistry::builtin().resolve("cpp");
        let lines = highlight("int a; /* one\ntwo */ int b;", spec);
        assert_eq!(lines[1][0], (TokenKind::Comment, "two */".into()));
        assert_eq!(lines[1].last().unwrap().0, TokenKind::Plain);
    }

    #[test]
    fn empty_code_is_refused() {
        let r = BuiltinCodeRenderer::new(CodeTheme::Light);
        assert!(matches!(r.render_png(" \n\t", None), Err(RenderError::EmptyInput)));
        assert!(r.render_png("x = 1", Some("no-such-language")).is_ok());
    }
}

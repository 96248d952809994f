//! Built-in renderer for a mermaid subset. Input the parser cannot handle is
//! rejected with its line-numbered message, so it doubles as a syntax gate.

mod draw;
pub mod parse;

use std::path::Path;

pub use parse::{parse, Diagram, ParseError};

use crate::{DiagramRenderer, ImageInfo, RenderError, RenderOutcome};

/// Parses and rasterises `source` to PNG bytes.
pub fn render_png(source: &str) -> Result<Vec<u8>, ParseError> {
    let diagram = parse(source)?;
    Ok(draw::draw(&diagram).encode_png())
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MermaidRenderer;

impl DiagramRenderer for MermaidRenderer {
    fn name(&self) -> &str {
        "builtin-mermaid"
    }

    fn version(&self) -> String {
        format!("builtin-mermaid {}", env!("CARGO_PKG_VERSION"))
    }

    fn render(&self, source: &str, output: &Path) -> Result<RenderOutcome, RenderError> {
        match render_png(source) {
            Ok(png) => {
                std::fs::write(output, &png)?;
                Ok(RenderOutcome::Accept(ImageInfo::inspect(output)?))
            }
            Err(e) => Ok(RenderOutcome::Reject { message: e.to_string() }),
        }
    }
}

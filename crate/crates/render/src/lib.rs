//! Image rendering for the synthesis pipeline and the benchmark assets:
//! diagram text to PNG (built-in mermaid subset or an external command) and
//! source code to a highlighted PNG (built-in or Pygments).

pub mod canvas;
pub mod code;
pub mod command;
pub mod mermaid;

use std::path::{Path, PathBuf};
use std::time::Duration;

use diagbench_core::Digest;
use serde::{Deserialize, Serialize};

pub use code::{BuiltinCodeRenderer, CodeTheme};
pub use command::{CommandDiagramRenderer, PygmentsRenderer};
pub use mermaid::MermaidRenderer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub sha256: Digest,
}

impl ImageInfo {
    /// Reads dimensions and content hash of an image on disk.
    pub fn inspect(path: &Path) -> Result<ImageInfo, RenderError> {
        let bytes = std::fs::read(path)?;
        let (width, height) = image::ImageReader::new(std::io::Cursor::new(&bytes))
            .with_guessed_format()?
            .into_dimensions()
            .map_err(|e| RenderError::Failure {
                status: None,
                stderr: format!("unreadable image {}: {e}", path.display()),
            })?;
        Ok(ImageInfo {
            path: path.to_path_buf(),
            width,
            height,
            sha256: Digest::of(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RenderOutcome {
    Accept(ImageInfo),
    /// The renderer ran and refused the input.
    Reject { message: String },
}

impl RenderOutcome {
    pub fn is_accept(&self) -> bool {
        matches!(self, RenderOutcome::Accept(_))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("renderer unavailable: {0}")]
    Environment(String),
    #[error("renderer failed{}: {stderr}", status.map(|s| format!(" (exit {s})")).unwrap_or_default())]
    Failure { status: Option<i32>, stderr: String },
    #[error("nothing to render")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait DiagramRenderer: Send + Sync {
    fn name(&self) -> &str;
    /// Identifies the renderer build; recorded in dataset metadata.
    fn version(&self) -> String;
    fn render(&self, source: &str, output: &Path) -> Result<RenderOutcome, RenderError>;
}

pub trait CodeRenderer: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> String;
    fn render(&self, code: &str, language_hint: Option<&str>, output: &Path) -> Result<ImageInfo, RenderError>;
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiagramRendererConfig {
    #[default]
    Builtin,
    /// `argv` may use `{input}` and `{output}`.
    Command {
        argv: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_seconds: f64,
    },
}

impl DiagramRendererConfig {
    pub fn build(&self) -> Result<Box<dyn DiagramRenderer>, RenderError> {
        Ok(match self {
            DiagramRendererConfig::Builtin => Box::new(MermaidRenderer),
            DiagramRendererConfig::Command { argv, timeout_seconds } => Box::new(CommandDiagramRenderer::new(
                argv.clone(),
                Duration::from_secs_f64(*timeout_seconds),
            )?),
        })
    }
}

fn default_style() -> String {
    "default".into()
}

fn default_program() -> String {
    "pygmentize".into()
}

fn default_font() -> String {
    "DejaVu Sans Mono".into()
}

fn default_font_size() -> u32 {
    14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CodeRendererConfig {
    Builtin {
        #[serde(default)]
        theme: CodeTheme,
    },
    Pygments {
        #[serde(default = "default_program")]
        program: String,
        #[serde(default = "default_style")]
        style: String,
        #[serde(default = "default_font")]
        font_name: String,
        #[serde(default = "default_font_size")]
        font_size: u32,
        #[serde(default = "default_timeout")]
        timeout_seconds: f64,
    },
}

impl Default for CodeRendererConfig {
    fn default() -> Self {
        CodeRendererConfig::Builtin {
            theme: CodeTheme::default(),
        }
    }
}

impl CodeRendererConfig {
    pub fn build(&self) -> Result<Box<dyn CodeRenderer>, RenderError> {
        Ok(match self {
            CodeRendererConfig::Builtin { theme } => Box::new(BuiltinCodeRenderer::new(*theme)),
            CodeRendererConfig::Pygments {
                program,
                style,
                font_name,
                font_size,
                timeout_seconds,
            } => Box::new(PygmentsRenderer::new(
                program,
                style,
                font_name,
                *font_size,
                Duration::from_secs_f64(*timeout_seconds),
            )?),
        })
    }
}

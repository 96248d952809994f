//! Instruction-data synthesis: cross-modal problems whose code blocks become
//! highlighted images, diagram-grounded problems produced by a two-step
//! model dialogue with render validation, stage assembly and statistics.

pub mod cross_modal;
pub mod diagram;
pub mod scripted;
pub mod stage;
pub mod stats;
pub mod types;

use std::path::Path;

use diagbench_client::ClientError;
use diagbench_render::RenderError;

pub use cross_modal::{make_cross_modal, CrossModal};
pub use diagram::{
    extract_diagram_block, lint_deferral, parse_sections, synth_diagram_step1, synth_diagram_step2, validate_render,
    ModelHandle, PromptTemplates, Step2Error, DEFAULT_DEFERRAL_PHRASES,
};
pub use stage::{
    diagram_share, load_dataset, partition, partition_digest, revalidate, DatasetMeta, StageDataset, SynthConfig,
    Synthesizer,
};
pub use stats::{compute_stats, CommandTokenizer, LengthStats, StatsReport, StatsSource, Tokenizer, WhitespaceTokenizer};
pub use types::{
    load_qa_pairs, parse_qa_pairs, CrossModalRecord, DiagramRecord, Disposition, ImageRef, LogEntry, Mixture, QAPair,
    Record, Route, Stage, DEFAULT_PLACEHOLDER,
};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("input: {0}")]
    Input(String),
    #[error("duplicate QA id {0:?}")]
    DuplicateId(String),
    #[error("stage1 needs at least 10 inputs, got {0}")]
    TooFewInputs(usize),
    /// A renderer or tokenizer is missing or unusable.
    #[error("environment: {0}")]
    Environment(String),
    #[error("render: {0}")]
    Render(String),
    #[error("model endpoint: {0}")]
    Model(#[source] ClientError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SynthError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SynthError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn from_render(e: RenderError) -> Self {
        match e {
            RenderError::Environment(m) => SynthError::Environment(m),
            other => SynthError::Render(other.to_string()),
        }
    }

    pub fn is_environment(&self) -> bool {
        matches!(self, SynthError::Environment(_))
    }
}

/// Why one record was not produced: a counted rejection, or a failure that
/// stops the batch.
#[derive(Debug)]
pub enum RecordFailure {
    Reject(String),
    Fatal(SynthError),
}

impl RecordFailure {
    pub fn from_render(e: RenderError) -> Self {
        match e {
            RenderError::Environment(m) => RecordFailure::Fatal(SynthError::Environment(m)),
            RenderError::Io(e) => RecordFailure::Fatal(SynthError::Render(e.to_string())),
            RenderError::EmptyInput => RecordFailure::Reject("RendererFailure: empty code block".into()),
            RenderError::Failure { status, stderr } => {
                RecordFailure::Reject(format!("RendererFailure (exit {status:?}): {stderr}"))
            }
        }
    }

    pub fn from_client(e: ClientError) -> Self {
        match e {
            ClientError::Auth { .. } | ClientError::Config(_) | ClientError::Cache(_) => {
                RecordFailure::Fatal(SynthError::Model(e))
            }
            other => RecordFailure::Reject(format!("model: {other}")),
        }
    }
}

//! Core data model for the diagram-grounded code generation benchmark:
//! the problem schema and manifest loader, code extraction from model
//! replies, and pass@k scoring.

pub mod benchmark;
pub mod digest;
pub mod extraction;
pub mod language;
pub mod metrics;

pub use benchmark::{
    filter_problems, load_benchmark, Benchmark, BenchmarkProblem, Category, DiagramRef, Difficulty, HarnessKind,
    LoadError, ProblemFilter, ProblemId, TestSuite,
};
pub use digest::Digest;
pub use extraction::{extract_code, strip_reasoning, ExtractedCode, ExtractionError, ModelResponseText, Origin};
pub use language::{Language, LanguageRegistry, LanguageSpec};
pub use metrics::{aggregate, pass_at_k, score_language, ProblemResult, ProblemTally, SampleOutcome, ScoreTable};

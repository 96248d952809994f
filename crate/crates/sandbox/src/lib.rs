//! Candidate execution against benchmark tests on pinned toolchains.
//!
//! A [`Sandbox`] probes each configured runtime at start-up, then judges
//! model responses: extract code, assemble it with the problem's test
//! cases, run it in a private workspace, and classify the outcome as a
//! [`Verdict`]. Only `Pass` scores.

pub mod assemble;
pub mod exec;
pub mod judge;
pub mod limits;
pub mod runtime;
pub mod validate;

pub use assemble::{assemble_program, assemble_sources, AssembleError, SourceFile, SourceSet};
pub use exec::{execute, Backend, ExecOptions, ExecutionReport, ExitStatus, Verdict};
pub use judge::{Judgement, Sandbox, SandboxConfig, SandboxError};
pub use limits::{NetworkPolicy, ResourceLimits};
pub use runtime::{MemoryEnforcement, ProbeOutcome, RuntimeSpec, RuntimeTable};
pub use validate::{validate_benchmark, ValidationDetail, ValidationReport};

//! The `diagbench` command line: benchmark validation, model evaluation,
//! data synthesis, statistics and score reports.

pub mod config;
pub mod evaluate;
pub mod manifest;
pub mod report;
pub mod results;
pub mod setup;
pub mod synthesize;
pub mod tables;
pub mod validate;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Exit codes: 0 clean, 1 evaluation failures, 2 environment or input errors.
#[derive(Debug, Parser)]
#[command(name = "diagbench", version, about = "Diagram-grounded code generation benchmark runner")]
pub struct Cli {
    /// Run configuration (limits, runtimes, endpoint, renderers).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that every canonical solution passes its tests.
    Validate(validate::ValidateArgs),
    /// Query a model on the benchmark and score its answers.
    Evaluate(evaluate::EvaluateArgs),
    /// Build a stage-1 or stage-2 instruction dataset from QA pairs.
    Synthesize(synthesize::SynthesizeArgs),
    /// Counts, image sizes and token lengths of a dataset or benchmark.
    Stats(synthesize::StatsArgs),
    /// Compare result files in one table.
    Report(report::ReportArgs),
    /// Render one diagram source with the configured renderer.
    RenderDiagram(synthesize::RenderArgs),
    /// Write a stub endpoint fixture.
    MakeStub(synthesize::MakeStubArgs),
}

pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    let cfg = config::RunConfig::load_or_default(cli.config.as_deref())?;
    match &cli.command {
        Command::Validate(a) => validate::run(a, &cfg),
        Command::Evaluate(a) => evaluate::run(a, &cfg),
        Command::Synthesize(a) => synthesize::synthesize(a, &cfg),
        Command::Stats(a) => synthesize::stats(a),
        Command::Report(a) => report::run(a),
        Command::RenderDiagram(a) => synthesize::render_diagram(a, &cfg),
        Command::MakeStub(a) => synthesize::make_stub(a, &cfg),
    }
}

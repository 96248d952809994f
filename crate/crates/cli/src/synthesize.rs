//! `synthesize`, `stats`, `render-diagram` and `make-stub`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use diagbench_client::{OnMiss, StubFixture};
use diagbench_render::RenderOutcome;
use diagbench_synth::scripted::{scripted_fixture, Fault};
use diagbench_synth::{
    compute_stats, load_dataset, load_qa_pairs, CommandTokenizer, ModelHandle, PromptTemplates, Stage, StatsSource,
    SynthConfig, SynthError, Synthesizer, Tokenizer, WhitespaceTokenizer,
};

use crate::config::RunConfig;
use crate::evaluate::ModeArg;
use crate::manifest::{now, ManifestInputs, RunManifest};
use crate::setup::{self, ModelArgs};

#[derive(Debug, Clone, Args)]
pub struct SynthesizeArgs {
    /// QA pairs as JSON lines.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_stage)]
    pub stage: Stage,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Greedy)]
    pub mode: ModeArg,
    /// Directory holding diagram_step1.txt and diagram_step2.txt.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn templates(explicit: Option<&Path>, cfg: &RunConfig) -> Result<PromptTemplates> {
    match explicit.or(cfg.synthesis.templates.as_deref()) {
        Some(dir) => Ok(PromptTemplates::from_dir(dir)?),
        None => Ok(PromptTemplates::builtin()),
    }
}

fn environment_exit(what: &str, e: impl std::fmt::Display) -> Result<i32> {
    eprintln!("{what} unavailable: {e}");
    Ok(2)
}

pub fn synthesize(args: &SynthesizeArgs, cfg: &RunConfig) -> Result<i32> {
    let qas = load_qa_pairs(&args.input)?;
    let code_renderer = match cfg.renderers.code.build() {
        Ok(r) => r,
        Err(e) => return environment_exit("code renderer", e),
    };
    let diagram_renderer = match cfg.renderers.diagram.build() {
        Ok(r) => r,
        Err(e) => return environment_exit("diagram renderer", e),
    };
    let templates = templates(args.templates.as_deref(), cfg)?;
    let endpoint = setup::endpoint_config(&args.model, cfg)?;
    let client = setup::build_client(&endpoint, &args.model)?;
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        seed: args.seed,
        placeholder: cfg.synthesis.placeholder.clone().unwrap_or(defaults.placeholder),
        deferral_phrases: cfg.synthesis.deferral_phrases.clone().unwrap_or(defaults.deferral_phrases),
        workers: args.workers.or(cfg.synthesis.workers).unwrap_or(defaults.workers),
    };
    let decoding = args.mode.decoding();
    let run_config = serde_json::json!({
        "stage": args.stage,
        "seed": config.seed,
        "placeholder": config.placeholder,
        "deferral_phrases": config.deferral_phrases,
        "renderers": cfg.renderers,
        "code_renderer": format!("{} {}", code_renderer.name(), code_renderer.version()),
        "diagram_renderer": format!("{} {}", diagram_renderer.name(), diagram_renderer.version()),
        "templates": templates.digest(),
        "endpoint": setup::endpoint_identity(&endpoint)?,
        "input": diagbench_core::Digest::of(std::fs::read(&args.input)?),
    });
    let mut manifest = RunManifest::new(ManifestInputs {
        command: "synthesize",
        config: &run_config,
        benchmark_digest: None,
        model_id: Some(endpoint.model_id.clone()),
        decoding: Some(decoding),
        runtime_digests: BTreeMap::new(),
        tool_versions: BTreeMap::new(),
    });
    let synth = Synthesizer {
        model: ModelHandle {
            client: &client,
            model_id: endpoint.model_id.clone(),
            decoding,
        },
        code_renderer: code_renderer.as_ref(),
        diagram_renderer: diagram_renderer.as_ref(),
        templates,
        config,
    };
    setup::create_dir(&args.out)?;
    let ds = match synth.assemble_stage(&qas, args.stage, &args.out) {
        Ok(ds) => ds,
        Err(e @ SynthError::Environment(_)) => return environment_exit("synthesis tool", e),
        Err(SynthError::Model(e)) => {
            eprintln!("model endpoint unusable: {e}");
            return Ok(2);
        }
        Err(e) => return Err(e.into()),
    };
    manifest.finished_at = Some(now());
    manifest.write(&args.out)?;
    let m = &ds.meta;
    println!(
        "{}: {} inputs, planned {} cross-modal / {} diagram, retained {} cross-modal / {} diagram, {} skipped, {} rejected",
        m.stage,
        m.inputs,
        m.planned.cross_modal,
        m.planned.diagram,
        m.mixture.cross_modal,
        m.mixture.diagram,
        m.skipped,
        m.rejected
    );
    println!("partition digest: {}", m.partition_digest);
    for entry in ds.rejections() {
        println!("rejected {}: {}", entry.id, entry.reason.as_deref().unwrap_or(""));
    }
    if let Some(w) = &m.warning {
        eprintln!("warning: {w}");
        return Ok(1);
    }
    Ok(0)
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Synthesized dataset directory, benchmark directory or manifest.
    pub input: PathBuf,
    /// Token counter command: JSON array of strings on stdin, counts on stdout.
    #[arg(long, conflicts_with = "whitespace_tokens")]
    pub tokenizer: Option<String>,
    /// Count whitespace-separated words instead of model tokens.
    #[arg(long)]
    pub whitespace_tokens: bool,
    #[arg(long)]
    pub json: bool,
}

pub fn stats(args: &StatsArgs) -> Result<i32> {
    let command;
    let tokenizer: Option<&dyn Tokenizer> = if let Some(cmd) = &args.tokenizer {
        command = CommandTokenizer {
            argv: cmd.split_whitespace().map(str::to_string).collect(),
        };
        Some(&command)
    } else if args.whitespace_tokens {
        Some(&WhitespaceTokenizer)
    } else {
        None
    };
    let result = if args.input.join("dataset.json").exists() {
        let ds = load_dataset(&args.input)?;
        compute_stats(StatsSource::Dataset(&ds), tokenizer)
    } else {
        let bench = setup::load(&args.input)?;
        compute_stats(StatsSource::Benchmark(&bench), tokenizer)
    };
    let report = match result {
        Ok(r) => r,
        Err(e @ SynthError::Environment(_)) => return environment_exit("tokenizer", e),
        Err(e) => return Err(e.into()),
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(0)
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn render_diagram(args: &RenderArgs, cfg: &RunConfig) -> Result<i32> {
    let renderer = match cfg.renderers.diagram.build() {
        Ok(r) => r,
        Err(e) => return environment_exit("diagram renderer", e),
    };
    let source = std::fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    match renderer.render(&source, &args.output) {
        Ok(RenderOutcome::Accept(info)) => {
            println!("{} {}x{} {}", args.output.display(), info.width, info.height, info.sha256);
            Ok(0)
        }
        Ok(RenderOutcome::Reject { message }) => {
            println!("rejected: {message}");
            Ok(1)
        }
        Err(diagbench_render::RenderError::Environment(m)) => environment_exit("diagram renderer", m),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StubKind {
    /// Every problem answered with its canonical solution.
    Canonical,
    /// Every request answered with prose and no code.
    Prose,
    /// Canonical answers only when the diagram is attached, prose otherwise.
    ImageGated,
    /// Scripted replies for both synthesis steps of a QA file.
    Synthesis,
}

#[derive(Debug, Clone, Args)]
pub struct MakeStubArgs {
    #[arg(long, value_enum)]
    pub kind: StubKind,
    /// Benchmark for the canonical, prose and image-gated kinds.
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// QA pairs for the synthesis kind.
    #[arg(long)]
    pub qa: Option<PathBuf>,
    /// `id=fault` pairs for the synthesis kind, e.g. qa-003=unquoted-label.
    #[arg(long = "fault")]
    pub faults: Vec<String>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub const PROSE_REPLY: &str =
    "The diagram lays out the required behaviour step by step. Follow each step in order and return the final value.";

fn canonical_fixture(benchmark: &Path) -> Result<StubFixture> {
    let bench = setup::load(benchmark)?;
    let mut fixture = StubFixture::new(OnMiss::Error("no canonical reply for this prompt".into()));
    fixture.description = format!("canonical solutions for {} problems", bench.len());
    for p in &bench.problems {
        let reply = format!("```{}\n{}\n```\n", p.language.id(), p.canonical_solution.trim_end());
        let key = StubFixture::instruction_key(&p.prompt);
        if let Some(existing) = fixture.by_instruction.get(&key) {
            if *existing != reply {
                bail!("{} shares its prompt with another problem whose solution differs", p.id());
            }
        }
        fixture.by_instruction.insert(key, reply);
    }
    Ok(fixture)
}

pub fn make_stub(args: &MakeStubArgs, cfg: &RunConfig) -> Result<i32> {
    let need_bench = || args.benchmark.as_deref().context("--benchmark is required for this kind");
    let fixture = match args.kind {
        StubKind::Canonical => canonical_fixture(need_bench()?)?,
        StubKind::Prose => {
            let mut f = StubFixture::new(OnMiss::Reply(PROSE_REPLY.into()));
            f.description = "prose replies without code".into();
            f
        }
        StubKind::ImageGated => {
            let mut f = canonical_fixture(need_bench()?)?;
            f.description = format!("{}, only when the diagram is attached", f.description);
            f.require_image = true;
            f.text_only_reply = PROSE_REPLY.into();
            f
        }
        StubKind::Synthesis => {
            let qa = args.qa.as_deref().context("--qa is required for the synthesis kind")?;
            let qas = load_qa_pairs(qa)?;
            let mut faults = BTreeMap::new();
            for raw in &args.faults {
                let (id, kind) = raw.split_once('=').with_context(|| format!("--fault {raw:?}: expected id=fault"))?;
                let fault: Fault = serde_json::from_value(serde_json::Value::String(kind.into()))
                    .with_context(|| format!("--fault {raw:?}: unknown fault"))?;
                faults.insert(id.to_string(), fault);
            }
            scripted_fixture(&qas, &templates(args.templates.as_deref(), cfg)?, &faults)
        }
    };
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        setup::create_dir(parent)?;
    }
    std::fs::write(&args.output, serde_json::to_string_pretty(&fixture)? + "\n")
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("{} ({})", args.output.display(), fixture.description);
    Ok(0)
}

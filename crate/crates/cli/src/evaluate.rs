//! `evaluate`: query the model for every (problem, sample), judge the
//! replies, write results and score tables. Reruns skip samples already in
//! the results file.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use diagbench_client::{build_request, ClientError, DecodingConfig, DecodingMode};
use diagbench_core::benchmark::{filter_problems, Category, ProblemFilter};
use diagbench_core::metrics::{aggregate, format_percent, MetricsError, ScoreTable};
use diagbench_core::{BenchmarkProblem, Digest, Language};
use diagbench_sandbox::{SandboxError, Verdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::{now, ManifestInputs, RunManifest};
use crate::results::{
    read_results, sort_records, write_jsonl, ErrorRecord, ReportRecord, ResultRecord, ERRORS_FILE, REPORTS_FILE,
    RESULTS_FILE,
};
use crate::setup::{self, ModelArgs};
use crate::tables::{comparison_text, comparison_tsv, ScoreRow};

pub const SCORES_JSON: &str = "scores.json";
pub const SCORES_TXT: &str = "scores.txt";
pub const SCORES_TSV: &str = "scores.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Greedy,
    Thinking,
}

impl ModeArg {
    pub fn decoding(self) -> DecodingConfig {
        let mode = match self {
            ModeArg::Greedy => DecodingMode::Greedy,
            ModeArg::Thinking => DecodingMode::Thinking,
        };
        DecodingConfig::for_mode(mode).expect("named modes have fixed parameters")
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Benchmark directory or manifest file.
    pub benchmark: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub categories: Vec<String>,
    /// Send the prompt without its diagram.
    #[arg(long)]
    pub no_diagram: bool,
    #[arg(long, default_value_t = 1)]
    pub k: u64,
    /// Samples per problem; defaults to k.
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long, value_enum, default_value_t = ModeArg::Greedy)]
    pub mode: ModeArg,
    /// TOML file overriding resource limits.
    #[arg(long)]
    pub limits: Option<PathBuf>,
    /// Discard results from a differently configured earlier run.
    #[arg(long)]
    pub fresh: bool,
    /// Row label for tables; defaults to the model id.
    #[arg(long)]
    pub label: Option<String>,
}

/// Machine-readable scores beside the results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoresFile {
    pub manifest_digest: Digest,
    pub benchmark_digest: Digest,
    pub label: String,
    pub model_id: String,
    pub no_diagram: bool,
    pub samples: u32,
    pub table: ScoreTable,
    /// One-decimal display values keyed by column name.
    pub display: BTreeMap<String, String>,
    pub unavailable: BTreeMap<Language, String>,
    pub model_errors: usize,
}

enum Msg {
    Done(Box<ResultRecord>, Box<ReportRecord>),
    Failed(ErrorRecord),
}

struct Counters {
    written: Vec<ResultRecord>,
    errors: usize,
}

fn writer(out: &Path, rx: mpsc::Receiver<Msg>) -> Result<Counters> {
    let open = |name: &str, append: bool| {
        let path = out.join(name);
        OpenOptions::new()
            .create(true)
            .append(append)
            .write(true)
            .truncate(!append)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))
    };
    let mut results = open(RESULTS_FILE, true)?;
    let mut reports = open(REPORTS_FILE, true)?;
    let mut errors = open(ERRORS_FILE, false)?;
    let mut counters = Counters {
        written: Vec::new(),
        errors: 0,
    };
    for msg in rx {
        match msg {
            Msg::Done(rec, rep) => {
                writeln!(results, "{}", serde_json::to_string(&rec)?)?;
                writeln!(reports, "{}", serde_json::to_string(&rep)?)?;
                counters.written.push(*rec);
            }
            Msg::Failed(e) => {
                writeln!(errors, "{}", serde_json::to_string(&e)?)?;
                counters.errors += 1;
            }
        }
    }
    results.flush()?;
    Ok(counters)
}

fn is_fatal(e: &ClientError) -> bool {
    matches!(e, ClientError::Auth { .. } | ClientError::Config(_) | ClientError::Cache(_))
}

fn category_filter(raw: &[String]) -> Result<Vec<Category>> {
    raw.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Category>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}

pub fn run(args: &EvaluateArgs, cfg: &RunConfig) -> Result<i32> {
    let full = setup::load(&args.benchmark)?;
    let filter = ProblemFilter {
        languages: setup::parse_languages(&args.languages)?.into_iter().collect(),
        categories: category_filter(&args.categories)?.into_iter().collect(),
        concept_ids: Default::default(),
    };
    let bench = filter_problems(&full, &filter);
    if bench.is_empty() {
        bail!("no problems match the language and category filters");
    }
    if args.k == 0 {
        bail!("--k must be at least 1");
    }
    let samples = args.samples.unwrap_or(args.k as u32).max(1);
    if u64::from(samples) < args.k {
        bail!("--samples ({samples}) must be at least --k ({})", args.k);
    }
    let decoding = args.mode.decoding();
    let endpoint = setup::endpoint_config(&args.model, cfg)?;
    let limits = cfg.limits(args.limits.as_deref())?;
    let sandbox = setup::start_sandbox(cfg, limits.clone(), &bench.languages())?;
    let client = setup::build_client(&endpoint, &args.model)?;

    let runtime_digests = sandbox.runtime_digests();
    let config = json!({
        "filter": {"languages": filter.languages, "categories": filter.categories},
        "no_diagram": args.no_diagram,
        "samples": samples,
        "limits": limits,
        "reruns": cfg.sandbox.reruns,
        "backend": cfg.sandbox.backend,
        "endpoint": setup::endpoint_identity(&endpoint)?,
    });
    let mut manifest = RunManifest::new(ManifestInputs {
        command: "evaluate",
        config: &config,
        benchmark_digest: Some(bench.source_digest.clone()),
        model_id: Some(endpoint.model_id.clone()),
        decoding: Some(decoding),
        runtime_digests,
        tool_versions: setup::tool_versions(&sandbox),
    });

    setup::create_dir(&args.out)?;
    let results_path = args.out.join(RESULTS_FILE);
    let mut previous = Vec::new();
    if results_path.exists() {
        let existing = read_results(&results_path)?;
        if let Some(other) = existing.iter().find(|r| r.manifest_digest != manifest.digest) {
            if !args.fresh {
                bail!(
                    "{} holds results of a different configuration (manifest {}, this run {}); pass --fresh to discard them",
                    results_path.display(),
                    other.manifest_digest.short(12),
                    manifest.digest.short(12)
                );
            }
            for name in [RESULTS_FILE, REPORTS_FILE] {
                let _ = std::fs::remove_file(args.out.join(name));
            }
        } else {
            previous = existing;
        }
    }
    // Rewrite without any truncated tail before appending.
    sort_records(&mut previous);
    write_jsonl(&results_path, &previous)?;
    let done: HashMap<Digest, ()> = previous.iter().map(|r| (r.request_digest.clone(), ())).collect();

    let unavailable = sandbox.unavailable().clone();
    let mut jobs: Vec<(&BenchmarkProblem, u32)> = Vec::new();
    for p in &bench.problems {
        if unavailable.contains_key(&p.language) {
            continue;
        }
        for s in 0..samples {
            jobs.push((p, s));
        }
    }
    for (lang, reason) in &unavailable {
        eprintln!("runtime unavailable for {lang}: {reason}; its problems are not evaluated");
    }

    let (tx, rx) = mpsc::channel::<Msg>();
    let out_dir = args.out.clone();
    let writer_handle = std::thread::spawn(move || writer(&out_dir, rx));
    let abort = AtomicBool::new(false);
    let threads = (sandbox.config().concurrency() + endpoint.max_in_flight).clamp(2, 64);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let manifest_digest = manifest.digest.clone();
    let benchmark_digest = bench.source_digest.clone();
    let resumed = std::sync::atomic::AtomicUsize::new(0);
    pool.install(|| {
        jobs.par_iter().for_each_with(tx, |tx, &(p, s)| {
            if abort.load(Ordering::Relaxed) {
                return;
            }
            let id = p.id().to_string();
            let fail = |tx: &mut mpsc::Sender<Msg>, digest: Option<Digest>, error: String| {
                let _ = tx.send(Msg::Failed(ErrorRecord {
                    problem: id.clone(),
                    sample_index: s,
                    request_digest: digest,
                    error,
                }));
            };
            let req = match build_request(p, !args.no_diagram, decoding, &endpoint.model_id, s) {
                Ok(r) => r,
                Err(e) => return fail(tx, None, e.to_string()),
            };
            if done.contains_key(&req.request_digest) {
                resumed.fetch_add(1, Ordering::Relaxed);
                return;
            }
            let resp = match client.complete(&req) {
                Ok(r) => r,
                Err(e) => {
                    if is_fatal(&e) {
                        abort.store(true, Ordering::Relaxed);
                    }
                    return fail(tx, Some(req.request_digest.clone()), e.to_string());
                }
            };
            let (verdict, r, origin, fence_info, reason, report) = match sandbox.judge(p, &resp.text) {
                Ok(j) => (j.report.verdict, j.r, j.origin, j.fence_info, j.reason, Some(j.report)),
                // The candidate could not be placed into the harness.
                Err(SandboxError::Assemble(e)) => (Verdict::CompileError, 0, None, None, Some(e.to_string()), None),
                Err(e @ SandboxError::RuntimeUnavailable { .. }) => {
                    return fail(tx, Some(req.request_digest.clone()), e.to_string())
                }
            };
            let record = ResultRecord {
                manifest_digest: manifest_digest.clone(),
                benchmark_digest: benchmark_digest.clone(),
                problem: id.clone(),
                concept_id: p.concept_id,
                language: p.language,
                category: p.category,
                sample_index: s,
                request_digest: req.request_digest.clone(),
                r,
                verdict,
                origin,
                fence_info,
                reason,
                flaky: report.as_ref().is_some_and(|r| r.flaky),
            };
            let detail = ReportRecord {
                problem: id.clone(),
                sample_index: s,
                request_digest: req.request_digest.clone(),
                cached: resp.cached,
                attempts: resp.attempts,
                latency: resp.latency,
                report,
            };
            let _ = tx.send(Msg::Done(Box::new(record), Box::new(detail)));
        });
    });
    let counters = writer_handle.join().expect("writer thread")?;

    let mut all = previous;
    all.extend(counters.written.iter().cloned());
    sort_records(&mut all);
    write_jsonl(&results_path, &all)?;
    manifest.finished_at = Some(now());
    manifest.write(&args.out)?;

    let infra = all.iter().filter(|r| r.verdict == Verdict::Infra).count();
    let label = args.label.clone().unwrap_or_else(|| {
        if args.no_diagram {
            format!("{} (no diagram)", endpoint.model_id)
        } else {
            endpoint.model_id.clone()
        }
    });
    println!(
        "{} samples judged ({} new, {} resumed), {} model errors, {} infra",
        all.len(),
        counters.written.len(),
        resumed.load(Ordering::Relaxed),
        counters.errors,
        infra
    );
    match aggregate(&crate::results::tallies(&all), args.k) {
        Ok(mut table) => {
            table.decoding_digest = Some(Digest::of_json(&decoding));
            let scores = ScoresFile {
                manifest_digest: manifest.digest.clone(),
                benchmark_digest: bench.source_digest.clone(),
                label: label.clone(),
                model_id: endpoint.model_id.clone(),
                no_diagram: args.no_diagram,
                samples,
                display: display_values(&table),
                table,
                unavailable: unavailable.clone(),
                model_errors: counters.errors,
            };
            write_scores(&args.out, &scores)?;
            print!("{}", std::fs::read_to_string(args.out.join(SCORES_TXT))?);
        }
        Err(MetricsError::NoResults) => eprintln!("no problem has enough judged samples to score"),
        Err(e) => return Err(e.into()),
    }

    if abort.load(Ordering::Relaxed) {
        eprintln!("aborted: the endpoint refused the configuration; see {}", args.out.join(ERRORS_FILE).display());
        return Ok(2);
    }
    if infra > 0 || !unavailable.is_empty() {
        return Ok(2);
    }
    if counters.errors > 0 {
        eprintln!(
            "{} samples failed at the model endpoint; see {} (rerun to retry them)",
            counters.errors,
            args.out.join(ERRORS_FILE).display()
        );
        return Ok(1);
    }
    Ok(0)
}

pub fn display_values(table: &ScoreTable) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = table
        .per_language
        .iter()
        .map(|(l, v)| (l.display_name().to_string(), format_percent(*v)))
        .collect();
    out.extend(table.per_category.iter().map(|(c, v)| (c.name().to_string(), format_percent(*v))));
    out.insert("Avg.".into(), format_percent(table.overall));
    out
}

pub fn write_scores(dir: &Path, scores: &ScoresFile) -> Result<()> {
    let row = [ScoreRow {
        label: scores.label.clone(),
        table: &scores.table,
    }];
    let mut text = comparison_text(&row);
    text.push_str(&format!(
        "\nproblems scored: {}, infra samples excluded: {}, problems without enough samples: {}\n",
        scores.table.problems_scored,
        scores.table.infra_excluded_samples,
        scores.table.excluded_problems.len()
    ));
    text.push_str(&format!("manifest: {}\n", scores.manifest_digest));
    std::fs::write(dir.join(SCORES_TXT), text)?;
    std::fs::write(dir.join(SCORES_TSV), comparison_tsv(&row))?;
    let mut json = serde_json::to_string_pretty(scores)?;
    json.push('\n');
    std::fs::write(dir.join(SCORES_JSON), json)?;
    Ok(())
}

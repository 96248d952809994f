//! Running assembled sources inside a private workspace under rlimits and
//! a private network namespace.

use std::io::{ErrorKind, Read};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use diagbench_core::Digest;
use serde::{Deserialize, Serialize};

use crate::assemble::SourceSet;
use crate::limits::ResourceLimits;
use crate::runtime::{fill, MemoryEnforcement, RuntimeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    CompileError,
    RuntimeError,
    WrongAnswer,
    Timeout,
    OutputLimit,
    Infra,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "Pass",
            Verdict::CompileError => "CompileError",
            Verdict::RuntimeError => "RuntimeError",
            Verdict::WrongAnswer => "WrongAnswer",
            Verdict::Timeout => "Timeout",
            Verdict::OutputLimit => "OutputLimit",
            Verdict::Infra => "Infra",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitStatus {
    Code(i32),
    Signal(i32),
    NotRun,
}

impl ExitStatus {
    fn from_std(status: std::process::ExitStatus) -> Self {
        match (status.code(), status.signal()) {
            (Some(c), _) => ExitStatus::Code(c),
            (None, Some(s)) => ExitStatus::Signal(s),
            (None, None) => ExitStatus::NotRun,
        }
    }

    pub fn success(self) -> bool {
        self == ExitStatus::Code(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub verdict: Verdict,
    pub exit_status: ExitStatus,
    pub stdout: String,
    pub stderr: String,
    /// Seconds, compile plus run.
    pub wall_time: f64,
    pub workspace_digest: Digest,
    pub runtime_digest: Digest,
    pub limits: ResourceLimits,
    /// Step that produced the verdict: "compile", "run" or "assemble".
    pub step: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default)]
    pub flaky: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workspace: Option<PathBuf>,
}

impl ExecutionReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Backend {
    /// Direct subprocess with rlimits in a fresh network namespace.
    #[default]
    Process,
    /// Every step runs through `engine run --network none` on `image`.
    Container { engine: String, image: String },
}

#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    pub keep_workspace: bool,
    pub backend: Backend,
    /// Parent directory for workspaces; the system temp dir when unset.
    pub scratch_root: Option<PathBuf>,
}

const PASSTHROUGH_ENV: [&str; 6] = ["PATH", "JAVA_HOME", "KOTLIN_HOME", "SCALA_HOME", "LD_LIBRARY_PATH", "MONO_PATH"];
const POLL: Duration = Duration::from_millis(5);
const DRAIN_GRACE: Duration = Duration::from_secs(1);

/// Environment every step sees: an allowlist of the host's plus a private
/// HOME and TMPDIR.
pub fn step_env(workdir: &Path) -> Vec<(String, String)> {
    let mut env: Vec<(String, String)> = PASSTHROUGH_ENV
        .iter()
        .filter_map(|k| std::env::var(k).ok().map(|v| (k.to_string(), v)))
        .collect();
    let dir = workdir.display().to_string();
    env.push(("HOME".into(), dir.clone()));
    env.push(("TMPDIR".into(), dir));
    env.push(("LANG".into(), "C.UTF-8".into()));
    env
}

/// Host environment used for version probes.
pub fn probe_env() -> Vec<(String, String)> {
    PASSTHROUGH_ENV
        .iter()
        .filter_map(|k| std::env::var(k).ok().map(|v| (k.to_string(), v)))
        .chain([("LANG".to_string(), "C.UTF-8".to_string())])
        .collect()
}

/// Expands the command placeholders of one argv template.
pub fn expand_argv(template: &[String], sources: &SourceSet, limits: &ResourceLimits) -> Vec<String> {
    let stem = Path::new(&sources.entry)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mem = limits.memory_mb().to_string();
    let mut argv = Vec::with_capacity(template.len());
    for arg in template {
        if arg == "{sources}" {
            argv.extend(sources.files.iter().map(|f| f.name.clone()));
        } else {
            argv.push(fill(arg, &[("entry", &sources.entry), ("entry_stem", &stem), ("memory_mb", &mem)]));
        }
    }
    argv
}

/// Argv that runs `argv` inside a container with the workspace mounted.
pub fn container_argv(engine: &str, image: &str, name: &str, workdir: &Path, memory_bytes: Option<u64>, argv: &[String]) -> Vec<String> {
    let mut out = vec![
        engine.to_string(),
        "run".into(),
        "--rm".into(),
        "--network".into(),
        "none".into(),
        "--name".into(),
        name.to_string(),
        "-v".into(),
        format!("{}:/work", workdir.display()),
        "-w".into(),
        "/work".into(),
        "-e".into(),
        "HOME=/work".into(),
    ];
    if let Some(bytes) = memory_bytes {
        out.push("--memory".into());
        out.push(format!("{bytes}b"));
    }
    out.push(image.to_string());
    out.extend(argv.iter().cloned());
    out
}

#[derive(Debug)]
struct StepOutcome {
    status: ExitStatus,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    timed_out: bool,
    overflowed: bool,
    spawn_error: Option<String>,
}

impl StepOutcome {
    fn not_run(reason: String) -> Self {
        StepOutcome {
            status: ExitStatus::NotRun,
            stdout: Vec::new(),
            stderr: Vec::new(),
            timed_out: false,
            overflowed: false,
            spawn_error: Some(reason),
        }
    }
}

struct StepRequest<'a> {
    argv: &'a [String],
    workdir: &'a Path,
    env: &'a [(String, String)],
    deadline: Instant,
    /// (resource, bytes) rlimit for memory.
    memory: Option<(libc::__rlimit_resource_t, u64)>,
    cpu_seconds: u64,
    max_output: u64,
    isolate_network: bool,
    container_name: Option<(&'a str, &'a str)>,
}

fn spawn_reader(
    mut pipe: impl Read + Send + 'static,
    sink: Arc<Mutex<Vec<u8>>>,
    total: Arc<AtomicU64>,
    cap: u64,
    overflow: Arc<AtomicBool>,
    done: mpsc::Sender<()>,
) {
    std::thread::spawn(move || {
        let mut buf = [0u8; 16 * 1024];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let prev = total.fetch_add(n as u64, Ordering::SeqCst);
                    let room = cap.saturating_sub(prev).min(n as u64) as usize;
                    if room > 0 {
                        sink.lock().expect("output buffer").extend_from_slice(&buf[..room]);
                    }
                    if prev + n as u64 > cap {
                        overflow.store(true, Ordering::SeqCst);
                    }
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(_) => break,
            }
        }
        let _ = done.send(());
    });
}

fn kill_group(pid: u32) {
    // SAFETY: signalling a process group we created.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

fn set_rlimit(resource: libc::__rlimit_resource_t, value: u64) -> std::io::Result<()> {
    let lim = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    // SAFETY: plain syscall on a stack value.
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}

/// Puts the child in a fresh network namespace, through a user namespace
/// when not privileged enough to do it directly.
fn enter_private_network() -> std::io::Result<()> {
    // SAFETY: unshare only affects the calling (child) process.
    if unsafe { libc::unshare(libc::CLONE_NEWNET) } == 0 {
        return Ok(());
    }
    if unsafe { libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) } == 0 {
        return Ok(());
    }
    Err(std::io::Error::other(format!(
        "cannot create private network namespace: {}",
        std::io::Error::last_os_error()
    )))
}

fn run_step(req: &StepRequest<'_>) -> StepOutcome {
    let Some((program, args)) = req.argv.split_first() else {
        return StepOutcome::not_run("empty argv".into());
    };
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(req.workdir)
        .env_clear()
        .envs(req.env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let memory = req.memory;
    let cpu = req.cpu_seconds;
    let isolate = req.isolate_network;
    // SAFETY: the closure only issues async-signal-safe syscalls.
    unsafe {
        cmd.pre_exec(move || {
            libc::prctl(libc::PR_SET_PDEATHSIG, libc::SIGKILL);
            set_rlimit(libc::RLIMIT_CORE, 0)?;
            set_rlimit(libc::RLIMIT_CPU, cpu)?;
            set_rlimit(libc::RLIMIT_FSIZE, 256 << 20)?;
            if let Some((resource, bytes)) = memory {
                set_rlimit(resource, bytes)?;
            }
            if isolate {
                enter_private_network()?;
            }
            Ok(())
        });
    }
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return StepOutcome::not_run(format!("spawning {program}: {e}")),
    };
    let pid = child.id();
    let total = Arc::new(AtomicU64::new(0));
    let overflow = Arc::new(AtomicBool::new(false));
    let out_buf = Arc::new(Mutex::new(Vec::new()));
    let err_buf = Arc::new(Mutex::new(Vec::new()));
    let (done_tx, done_rx) = mpsc::channel();
    spawn_reader(
        child.stdout.take().expect("piped"),
        out_buf.clone(),
        total.clone(),
        req.max_output,
        overflow.clone(),
        done_tx.clone(),
    );
    spawn_reader(
        child.stderr.take().expect("piped"),
        err_buf.clone(),
        total,
        req.max_output,
        overflow.clone(),
        done_tx,
    );

    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break ExitStatus::from_std(status),
            Ok(None) => {}
            Err(e) => {
                kill_group(pid);
                let _ = child.wait();
                return StepOutcome::not_run(format!("waiting on {program}: {e}"));
            }
        }
        let now = Instant::now();
        if now >= req.deadline || overflow.load(Ordering::SeqCst) {
            timed_out = now >= req.deadline;
            if let Some((engine, name)) = req.container_name {
                let _ = Command::new(engine)
                    .args(["kill", name])
                    .stdout(Stdio::null())
                    .stderr(Stdio::null())
                    .status();
            }
            kill_group(pid);
            let status = child.wait().map(ExitStatus::from_std).unwrap_or(ExitStatus::NotRun);
            break status;
        }
        std::thread::sleep(POLL.min(req.deadline.saturating_duration_since(now)));
    };
    // Reap anything the program left running in its group.
    kill_group(pid);
    for _ in 0..2 {
        if done_rx.recv_timeout(DRAIN_GRACE).is_err() {
            break;
        }
    }
    let stdout = std::mem::take(&mut *out_buf.lock().expect("output buffer"));
    let stderr = std::mem::take(&mut *err_buf.lock().expect("output buffer"));
    StepOutcome {
        status,
        stdout,
        stderr,
        timed_out,
        overflowed: overflow.load(Ordering::SeqCst),
        spawn_error: None,
    }
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Writes `sources` to a fresh workspace, compiles if the runtime needs it,
/// runs, and classifies the outcome.
pub fn execute(spec: &RuntimeSpec, sources: &SourceSet, limits: &ResourceLimits, opts: &ExecOptions) -> ExecutionReport {
    let started = Instant::now();
    let workspace_digest = sources.digest();
    let mut report = ExecutionReport {
        verdict: Verdict::Infra,
        exit_status: ExitStatus::NotRun,
        stdout: String::new(),
        stderr: String::new(),
        wall_time: 0.0,
        workspace_digest,
        runtime_digest: spec.digest(),
        limits: limits.clone(),
        step: "setup".into(),
        note: None,
        flaky: false,
        workspace: None,
    };
    if let Err(e) = limits.validate() {
        report.note = Some(e.to_string());
        return report;
    }
    let mut builder = tempfile::Builder::new();
    builder.prefix("diagbench-");
    let dir = match &opts.scratch_root {
        Some(root) => builder.tempdir_in(root),
        None => builder.tempdir(),
    };
    let dir = match dir {
        Ok(d) => d,
        Err(e) => {
            report.note = Some(format!("creating workspace: {e}"));
            return report;
        }
    };
    for file in &sources.files {
        let path = dir.path().join(&file.name);
        if let Err(e) = std::fs::write(&path, &file.contents) {
            report.note = Some(format!("writing {}: {e}", file.name));
            return report;
        }
    }

    run_steps(spec, sources, limits, opts, dir.path(), started, &mut report);
    report.wall_time = started.elapsed().as_secs_f64();
    if opts.keep_workspace {
        report.workspace = Some(dir.keep());
    } else if let Err(e) = dir.close() {
        tracing::warn!("removing workspace: {e}");
    }
    report
}

fn run_steps(
    spec: &RuntimeSpec,
    sources: &SourceSet,
    limits: &ResourceLimits,
    opts: &ExecOptions,
    workdir: &Path,
    started: Instant,
    report: &mut ExecutionReport,
) {
    let deadline = started + limits.wall_clock();
    let cpu_seconds = limits.wall_clock_seconds.ceil() as u64 + 1;
    let env = step_env(workdir);
    let container_name = format!("diagbench-{}", report.workspace_digest.short(12));

    let make_argv = |template: &[String], memory: bool| -> Vec<String> {
        let argv = expand_argv(template, sources, limits);
        match &opts.backend {
            Backend::Process => argv,
            Backend::Container { engine, image } => container_argv(
                engine,
                image,
                &container_name,
                workdir,
                memory.then_some(limits.memory_bytes),
                &argv,
            ),
        }
    };
    let container = match &opts.backend {
        Backend::Process => None,
        Backend::Container { engine, .. } => Some((engine.as_str(), container_name.as_str())),
    };
    let isolate_network = matches!(opts.backend, Backend::Process);

    if let Some(compile) = &spec.compile {
        report.step = "compile".into();
        let argv = make_argv(compile, false);
        let out = run_step(&StepRequest {
            argv: &argv,
            workdir,
            env: &env,
            deadline,
            memory: None,
            cpu_seconds,
            max_output: limits.max_output_bytes,
            isolate_network,
            container_name: container,
        });
        report.exit_status = out.status;
        report.stdout = text(&out.stdout);
        report.stderr = text(&out.stderr);
        if let Some(reason) = out.spawn_error {
            report.verdict = Verdict::Infra;
            report.note = Some(reason);
            return;
        }
        if out.timed_out {
            report.verdict = Verdict::Timeout;
            return;
        }
        if out.overflowed {
            report.verdict = Verdict::OutputLimit;
            return;
        }
        if !out.status.success() {
            report.verdict = Verdict::CompileError;
            return;
        }
    }

    report.step = "run".into();
    let argv = make_argv(&spec.run, true);
    let memory = match (&opts.backend, spec.memory) {
        (Backend::Container { .. }, _) | (_, MemoryEnforcement::None) => None,
        (_, MemoryEnforcement::AddressSpace) => Some((libc::RLIMIT_AS, limits.memory_bytes)),
        (_, MemoryEnforcement::Data) => Some((libc::RLIMIT_DATA, limits.memory_bytes)),
    };
    let out = run_step(&StepRequest {
        argv: &argv,
        workdir,
        env: &env,
        deadline,
        memory,
        cpu_seconds,
        max_output: limits.max_output_bytes,
        isolate_network,
        container_name: container,
    });
    report.exit_status = out.status;
    report.stdout = text(&out.stdout);
    report.stderr = text(&out.stderr);
    report.verdict = if let Some(reason) = out.spawn_error {
        report.note = Some(reason);
        Verdict::Infra
    } else if out.timed_out {
        Verdict::Timeout
    } else if out.overflowed {
        Verdict::OutputLimit
    } else if !out.status.success() {
        if spec.assertion_signatures.iter().any(|sig| report.stderr.contains(sig.as_str())) {
            Verdict::WrongAnswer
        } else {
            Verdict::RuntimeError
        }
    } else if let Some(expected) = &sources.expected_stdout {
        if report.stdout.trim_end() == expected.trim_end() {
            Verdict::Pass
        } else {
            report.note = Some("stdout differs from expected output".into());
            Verdict::WrongAnswer
        }
    } else {
        Verdict::Pass
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::SourceFile;
    use diagbench_core::Language;

    fn sources() -> SourceSet {
        SourceSet {
            language: Language::Java,
            files: vec![
                SourceFile {
                    name: "Bank.java".into(),
                    contents: String::new(),
                },
                SourceFile {
                    name: "Main.java".into(),
                    contents: String::new(),
                },
            ],
            entry: "Main.java".into(),
            expected_stdout: None,
        }
    }

    #[test]
    fn argv_placeholders_expand() {
        let limits = ResourceLimits::default();
        let t: Vec<String> = ["javac", "-d", ".", "{sources}"].map(String::from).to_vec();
        assert_eq!(expand_argv(&t, &sources(), &limits), ["javac", "-d", ".", "Bank.java", "Main.java"]);
        let t: Vec<String> = ["java", "-Xmx{memory_mb}m", "{entry_stem}", "{entry}"].map(String::from).to_vec();
        assert_eq!(expand_argv(&t, &sources(), &limits), ["java", "-Xmx1024m", "Main", "Main.java"]);
    }

    #[test]
    fn container_argv_denies_network() {
        let argv = container_argv(
            "docker",
            "diagbench-runtimes:1",
            "diagbench-abc",
            Path::new("/tmp/ws"),
            Some(1 << 30),
            &["python3".into(), "main.py".into()],
        );
        let joined = argv.join(" ");
        assert!(joined.starts_with("docker run --rm --network none --name diagbench-abc -v /tmp/ws:/work -w /work"));
        assert!(joined.ends_with("--memory 1073741824b diagbench-runtimes:1 python3 main.py"));
    }

    #[test]
    fn step_env_is_private() {
        let env = step_env(Path::new("/tmp/ws"));
        assert!(env.iter().any(|(k, v)| k == "HOME" && v == "/tmp/ws"));
        assert!(!env.iter().any(|(k, _)| k == "USER" || k == "SSH_AUTH_SOCK"));
    }

    #[test]
    fn verdict_serializes_by_name() {
        assert_eq!(serde_json::to_string(&Verdict::WrongAnswer).unwrap(), "\"WrongAnswer\"");
        assert_eq!(serde_json::to_string(&ExitStatus::Signal(9)).unwrap(), "{\"signal\":9}");
    }
}

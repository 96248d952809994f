//! External renderers driven through a command line.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use diagbench_core::LanguageRegistry;

use crate::{CodeRenderer, DiagramRenderer, ImageInfo, RenderError, RenderOutcome};

const EXCERPT: usize = 2048;

/// Locates `program` the way the shell would.
pub fn resolve_program(program: &str) -> Option<PathBuf> {
    let p = Path::new(program);
    if p.components().count() > 1 {
        return p.is_file().then(|| p.to_path_buf());
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths).map(|d| d.join(program)).find(|c| c.is_file())
    })
}

#[derive(Debug)]
pub struct CommandOutput {
    pub status: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
}

impl CommandOutput {
    pub fn success(&self) -> bool {
        !self.timed_out && self.status == Some(0)
    }
}

fn excerpt(s: &str) -> String {
    let s = s.trim();
    if s.len() <= EXCERPT {
        return s.to_string();
    }
    let mut end = EXCERPT;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &s[..end])
}

/// Runs `argv` to completion or until `timeout`, capturing both streams.
pub fn run_command(argv: &[String], timeout: Duration) -> Result<CommandOutput, RenderError> {
    let (program, args) = argv.split_first().ok_or(RenderError::EmptyInput)?;
    let mut child = match Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(RenderError::Environment(format!("{program}: not found")));
        }
        Err(e) => return Err(RenderError::Io(e)),
    };
    let mut out = child.stdout.take().expect("piped");
    let mut err = child.stderr.take().expect("piped");
    let out_reader = std::thread::spawn(move || {
        let mut s = Vec::new();
        let _ = out.read_to_end(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = Vec::new();
        let _ = err.read_to_end(&mut s);
        s
    });
    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break st;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            let _ = child.kill();
            break child.wait()?;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    let stdout = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
    Ok(CommandOutput {
        status: status.code(),
        stdout,
        stderr,
        timed_out,
    })
}

fn fill(argv: &[String], input: &Path, output: &Path) -> Vec<String> {
    argv.iter()
        .map(|a| {
            a.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
        })
        .collect()
}

/// Mermaid-cli style renderer: `argv` carries `{input}` and `{output}`.
pub struct CommandDiagramRenderer {
    argv: Vec<String>,
    timeout: Duration,
    version: String,
}

impl CommandDiagramRenderer {
    pub fn new(argv: Vec<String>, timeout: Duration) -> Result<Self, RenderError> {
        let program = argv
            .first()
            .cloned()
            .ok_or_else(|| RenderError::Environment("empty renderer command".into()))?;
        let path = resolve_program(&program)
            .ok_or_else(|| RenderError::Environment(format!("{program}: not found on PATH")))?;
        let version = run_command(&[path.to_string_lossy().into_owned(), "--version".into()], Duration::from_secs(30))
            .ok()
            .filter(CommandOutput::success)
            .map(|o| o.stdout.lines().next().unwrap_or("").trim().to_string())
            .filter(|v| !v.is_empty())
            .unwrap_or_else(|| "unknown".into());
        Ok(CommandDiagramRenderer {
            argv,
            timeout,
            version: format!("{program} {version}"),
        })
    }
}

impl DiagramRenderer for CommandDiagramRenderer {
    fn name(&self) -> &str {
        &self.argv[0]
    }

    fn version(&self) -> String {
        self.version.clone()
    }

    fn render(&self, source: &str, output: &Path) -> Result<RenderOutcome, RenderError> {
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("diagram.mmd");
        std::fs::write(&input, source)?;
        let _ = std::fs::remove_file(output);
        let result = run_command(&fill(&self.argv, &input, output), self.timeout)?;
        if result.timed_out {
            return Ok(RenderOutcome::Reject {
                message: format!("renderer timed out after {:.1}s", self.timeout.as_secs_f64()),
            });
        }
        let produced = std::fs::metadata(output).map(|m| m.len() > 0).unwrap_or(false);
        if result.success() && produced {
            return Ok(RenderOutcome::Accept(ImageInfo::inspect(output)?));
        }
        let message = match excerpt(&result.stderr) {
            s if !s.is_empty() => s,
            _ if result.success() => "renderer produced no image".into(),
            _ => format!("renderer exited with {:?}", result.status),
        };
        Ok(RenderOutcome::Reject { message })
    }
}

/// Code images through `pygmentize -f png`.
pub struct PygmentsRenderer {
    program: PathBuf,
    options: String,
    timeout: Duration,
    version: String,
}

impl PygmentsRenderer {
    pub fn new(program: &str, style: &str, font_name: &str, font_size: u32, timeout: Duration) -> Result<Self, RenderError> {
        let path = resolve_program(program)
            .ok_or_else(|| RenderError::Environment(format!("{program}: not found on PATH")))?;
        let probe = run_command(&[path.to_string_lossy().into_owned(), "-V".into()], Duration::from_secs(30))?;
        if !probe.success() {
            return Err(RenderError::Environment(format!("{program} -V failed: {}", excerpt(&probe.stderr))));
        }
        let version = probe.stdout.lines().next().unwrap_or("").trim().to_string();
        Ok(PygmentsRenderer {
            program: path,
            options: format!("style={style},font_name={font_name},font_size={font_size},line_numbers=False"),
            timeout,
            version,
        })
    }
}

impl CodeRenderer for PygmentsRenderer {
    fn name(&self) -> &str {
        "pygmentize"
    }

    fn version(&self) -> String {
        format!("{} [{}]", self.version, self.options)
    }

    fn render(&self, code: &str, language_hint: Option<&str>, output: &Path) -> Result<ImageInfo, RenderError> {
        let code = code.trim_end();
        if code.trim().is_empty() {
            return Err(RenderError::EmptyInput);
        }
        let lexer = language_hint
            .and_then(|h| LanguageRegistry::builtin().resolve(h))
            .map(|s| s.lexer.clone())
            .unwrap_or_else(|| "text".into());
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("snippet.txt");
        std::fs::write(&input, format!("{code}\n"))?;
        let argv = vec![
            self.program.to_string_lossy().into_owned(),
            "-l".into(),
            lexer,
            "-f".into(),
            "png".into(),
            "-O".into(),
            self.options.clone(),
            "-o".into(),
            output.to_string_lossy().into_owned(),
            input.to_string_lossy().into_owned(),
        ];
        let result = run_command(&argv, self.timeout)?;
        if !result.success() {
            return Err(RenderError::Failure {
                status: result.status,
                stderr: if result.timed_out { "timed out".into() } else { excerpt(&result.stderr) },
            });
        }
        let info = ImageInfo::inspect(output)?;
        if info.width == 0 || info.height == 0 {
            return Err(RenderError::Failure {
                status: result.status,
                stderr: "empty image".into(),
            });
        }
        Ok(info)
    }
}

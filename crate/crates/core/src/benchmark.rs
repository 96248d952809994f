//! Benchmark schema and the line-delimited manifest format.
//!
//! A manifest is UTF-8 text with one JSON object per line. An optional first
//! line `{"manifest_version": "..."}` names the format version; every other
//! non-blank line is one problem record. Diagram paths are relative to the
//! manifest's directory. `docs/manifest-schema.md` is the normative reference.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digest::Digest;
use crate::language::Language;

pub const DEFAULT_MANIFEST_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    ClassDesign,
    DesignPatterns,
    Algorithm,
    Simulation,
    AbstractionInheritance,
    CreationalPattern,
    StructuralPattern,
    BehavioralPattern,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::ClassDesign,
        Category::DesignPatterns,
        Category::Algorithm,
        Category::Simulation,
        Category::AbstractionInheritance,
        Category::CreationalPattern,
        Category::StructuralPattern,
        Category::BehavioralPattern,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::ClassDesign => "ClassDesign",
            Category::DesignPatterns => "DesignPatterns",
            Category::Algorithm => "Algorithm",
            Category::Simulation => "Simulation",
            Category::AbstractionInheritance => "AbstractionInheritance",
            Category::CreationalPattern => "CreationalPattern",
            Category::StructuralPattern => "StructuralPattern",
            Category::BehavioralPattern => "BehavioralPattern",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    /// Accepts the enum names and the task labels used in published task
    /// tables ("Basic Class Design", "Creational Patterns", ...), ignoring
    /// case, spacing and punctuation. Anything else is rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let cat = match key.as_str() {
            "classdesign" | "basicclassdesign" => Category::ClassDesign,
            "designpatterns" | "designpattern" => Category::DesignPatterns,
            "algorithm" | "algorithms" => Category::Algorithm,
            "simulation" | "simulations" => Category::Simulation,
            "abstractioninheritance" | "abstractionandinheritance" => Category::AbstractionInheritance,
            "creationalpattern" | "creationalpatterns" => Category::CreationalPattern,
            "structuralpattern" | "structuralpatterns" => Category::StructuralPattern,
            "behavioralpattern" | "behavioralpatterns" | "behaviouralpattern" | "behaviouralpatterns" => {
                Category::BehavioralPattern
            }
            _ => return Err(format!("unrecognized category {s:?}")),
        };
        Ok(cat)
    }
}

/// Informational only; never affects scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(format!("unrecognized difficulty {s:?}")),
        }
    }
}

/// How test cases attach to candidate code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarnessKind {
    /// Cases are appended after the candidate in one translation unit.
    AppendedAssertions,
    /// Cases form a separate entry-point file that calls into the candidate.
    MainDriver,
}

impl HarnessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HarnessKind::AppendedAssertions => "appended-assertions",
            HarnessKind::MainDriver => "main-driver",
        }
    }
}

impl fmt::Display for HarnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HarnessKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "appended-assertions" => Ok(HarnessKind::AppendedAssertions),
            "main-driver" => Ok(HarnessKind::MainDriver),
            _ => Err(format!("unrecognized harness_kind {s:?}")),
        }
    }
}

/// Test programs for one problem. A failing case makes the process exit
/// nonzero; when `expected_stdout` is set the trimmed output must also match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub cases: Vec<String>,
    pub harness_kind: HarnessKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_stdout: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramRef {
    /// Path as written in the manifest.
    pub path: PathBuf,
    /// `path` joined onto the manifest directory.
    pub resolved: PathBuf,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProblemId {
    pub concept_id: u32,
    pub language: Language,
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.language, self.concept_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkProblem {
    pub concept_id: u32,
    pub language: Language,
    pub prompt: String,
    pub diagram: DiagramRef,
    pub canonical_solution: String,
    pub tests: TestSuite,
    pub category: Category,
    pub difficulty: Difficulty,
}

impl BenchmarkProblem {
    pub fn id(&self) -> ProblemId {
        ProblemId {
            concept_id: self.concept_id,
            language: self.language,
        }
    }
}

/// An immutable, validated set of problems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Benchmark {
    pub problems: Vec<BenchmarkProblem>,
    pub manifest_version: String,
    pub source_digest: Digest,
    /// Directory that relative diagram paths were resolved against.
    pub root: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("diagram image not found: {}", path.display())]
    MissingImage { path: PathBuf },
    #[error("diagram image {} does not decode: {reason}", path.display())]
    InvalidImage { path: PathBuf, reason: String },
    #[error("duplicate problem: concept {concept_id} in {language}")]
    DuplicateProblem { concept_id: u32, language: Language },
}

/// Wire shape of one manifest line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRecord {
    concept_id: u32,
    language: String,
    prompt: String,
    diagram_path: String,
    solution: String,
    tests: Vec<String>,
    harness_kind: String,
    category: String,
    difficulty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected_stdout: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestHeader {
    manifest_version: String,
}

impl Benchmark {
    pub fn empty(root: impl Into<PathBuf>) -> Self {
        Benchmark {
            problems: Vec::new(),
            manifest_version: DEFAULT_MANIFEST_VERSION.to_string(),
            source_digest: Digest::of(""),
            root: root.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn get(&self, id: ProblemId) -> Option<&BenchmarkProblem> {
        self.problems.iter().find(|p| p.id() == id)
    }

    /// Languages present, in report column order.
    pub fn languages(&self) -> Vec<Language> {
        let present: BTreeSet<Language> = self.problems.iter().map(|p| p.language).collect();
        Language::ALL.into_iter().filter(|l| present.contains(l)).collect()
    }

    pub fn concept_ids(&self) -> BTreeSet<u32> {
        self.problems.iter().map(|p| p.concept_id).collect()
    }

    pub fn count_by_language(&self) -> BTreeMap<Language, usize> {
        let mut counts = BTreeMap::new();
        for p in &self.problems {
            *counts.entry(p.language).or_insert(0) += 1;
        }
        counts
    }

    /// True when every language present carries the same set of concept ids.
    pub fn is_language_parallel(&self) -> bool {
        let mut sets: BTreeMap<Language, BTreeSet<u32>> = BTreeMap::new();
        for p in &self.problems {
            sets.entry(p.language).or_default().insert(p.concept_id);
        }
        let mut iter = sets.values();
        match iter.next() {
            Some(first) => iter.all(|s| s == first),
            None => true,
        }
    }

    /// Serializes back to the manifest format, in problem order.
    pub fn to_manifest_string(&self) -> String {
        let mut out = serde_json::to_string(&ManifestHeader {
            manifest_version: self.manifest_version.clone(),
        })
        .expect("header serializes");
        out.push('\n');
        for p in &self.problems {
            let record = ManifestRecord {
                concept_id: p.concept_id,
                language: p.language.id().to_string(),
                prompt: p.prompt.clone(),
                diagram_path: p.diagram.path.to_string_lossy().replace('\\', "/"),
                solution: p.canonical_solution.clone(),
                tests: p.tests.cases.clone(),
                harness_kind: p.tests.harness_kind.as_str().to_string(),
                category: p.category.name().to_string(),
                difficulty: format!("{:?}", p.difficulty),
                expected_stdout: p.tests.expected_stdout.clone(),
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Reads and validates a manifest. Malformed input is rejected, never repaired.
pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Benchmark, LoadError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&bytes, &root)
}

/// Parses manifest bytes, resolving diagram paths against `root`.
pub fn parse_manifest(bytes: &[u8], root: &Path) -> Result<Benchmark, LoadError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LoadError::MalformedRecord {
        line: 0,
        reason: format!("manifest is not UTF-8: {e}"),
    })?;

    let mut manifest_version = None;
    let mut problems = Vec::new();
    let mut seen: HashMap<ProblemId, usize> = HashMap::new();
    let mut image_dims: HashMap<PathBuf, (u32, u32)> = HashMap::new();
    let mut first_record = true;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| LoadError::MalformedRecord { line: line_no, reason };

        let value: serde_json::Value =
            serde_json::from_str(raw_line).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
        if value.get("manifest_version").is_some() {
            if !first_record {
                return Err(malformed("manifest_version header must be the first record".into()));
            }
            let header: ManifestHeader =
                serde_json::from_value(value).map_err(|e| malformed(format!("bad header: {e}")))?;
            manifest_version = Some(header.manifest_version);
            first_record = false;
            continue;
        }
        first_record = false;

        let record: ManifestRecord = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let problem = record_to_problem(record, root, &mut image_dims).map_err(|err| match err {
            RecordError::Malformed(reason) => malformed(reason),
            RecordError::Load(e) => e,
        })?;

        if seen.insert(problem.id(), line_no).is_some() {
            return Err(LoadError::DuplicateProblem {
                concept_id: problem.concept_id,
                language: problem.language,
            });
        }
        problems.push(problem);
    }

    Ok(Benchmark {
        problems,
        manifest_version: manifest_version.unwrap_or_else(|| DEFAULT_MANIFEST_VERSION.to_string()),
        source_digest: Digest::of(bytes),
        root: root.to_path_buf(),
    })
}

enum RecordError {
    Malformed(String),
    Load(LoadError),
}

fn record_to_problem(
    r: ManifestRecord,
    root: &Path,
    image_dims: &mut HashMap<PathBuf, (u32, u32)>,
) -> Result<BenchmarkProblem, RecordError> {
    use RecordError::Malformed;

    if r.concept_id == 0 {
        return Err(Malformed("concept_id must be >= 1".into()));
    }
    let language: Language = r.language.parse().map_err(|e: crate::language::UnknownLanguage| Malformed(e.to_string()))?;
    if r.prompt.trim().is_empty() {
        return Err(Malformed("prompt is empty".into()));
    }
    if r.solution.trim().is_empty() {
        return Err(Malformed("solution is empty".into()));
    }
    if r.tests.is_empty() {
        return Err(Malformed("tests must contain at least one case".into()));
    }
    if let Some(i) = r.tests.iter().position(|c| c.trim().is_empty()) {
        return Err(Malformed(format!("test case {i} is empty")));
    }
    let harness_kind: HarnessKind = r.harness_kind.parse().map_err(Malformed)?;
    let category: Category = r.category.parse().map_err(Malformed)?;
    let difficulty: Difficulty = r.difficulty.parse().map_err(Malformed)?;
    if r.diagram_path.trim().is_empty() {
        return Err(Malformed("diagram_path is empty".into()));
    }

    let rel = PathBuf::from(&r.diagram_path);
    let resolved = root.join(&rel);
    let (width, height) = match image_dims.get(&resolved) {
        Some(&dims) => dims,
        None => {
            let dims = decode_dimensions(&resolved).map_err(RecordError::Load)?;
            image_dims.insert(resolved.clone(), dims);
            dims
        }
    };

    Ok(BenchmarkProblem {
        concept_id: r.concept_id,
        language,
        prompt: r.prompt,
        diagram: DiagramRef {
            path: rel,
            resolved,
            width,
            height,
        },
        canonical_solution: r.solution,
        tests: TestSuite {
            cases: r.tests,
            harness_kind,
            expected_stdout: r.expected_stdout,
        },
        category,
        difficulty,
    })
}

/// Fully decodes an image file and returns its pixel dimensions.
pub fn decode_dimensions(path: &Path) -> Result<(u32, u32), LoadError> {
    if !path.is_file() {
        return Err(LoadError::MissingImage {
            path: path.to_path_buf(),
        });
    }
    let invalid = |reason: String| LoadError::InvalidImage {
        path: path.to_path_buf(),
        reason,
    };
    let img = image::ImageReader::open(path)
        .map_err(|e| invalid(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| invalid(e.to_string()))?
        .decode()
        .map_err(|e| invalid(e.to_string()))?;
    if img.width() == 0 || img.height() == 0 {
        return Err(invalid("image has zero dimension".into()));
    }
    Ok((img.width(), img.height()))
}

/// Empty sets place no constraint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProblemFilter {
    pub languages: BTreeSet<Language>,
    pub categories: BTreeSet<Category>,
    pub concept_ids: BTreeSet<u32>,
}

impl ProblemFilter {
    pub fn is_empty(&self) -> bool {
        self.languages.is_empty() && self.categories.is_empty() && self.concept_ids.is_empty()
    }

    pub fn matches(&self, p: &BenchmarkProblem) -> bool {
        (self.languages.is_empty() || self.languages.contains(&p.language))
            && (self.categories.is_empty() || self.categories.contains(&p.category))
            && (self.concept_ids.is_empty() || self.concept_ids.contains(&p.concept_id))
    }
}

/// Sub-benchmark of the problems matching every non-empty filter, in order.
pub fn filter_problems(b: &Benchmark, filter: &ProblemFilter) -> Benchmark {
    Benchmark {
        problems: b.problems.iter().filter(|p| filter.matches(p)).cloned().collect(),
        manifest_version: b.manifest_version.clone(),
        source_digest: b.source_digest.clone(),
        root: b.root.clone(),
    }
}

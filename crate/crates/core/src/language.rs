//! Benchmark languages and the alias registry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const BUILTIN_REGISTRY: &str = include_str!("../../../config/languages.toml");

/// One of the ten languages a benchmark problem may be written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    CSharp,
    Cpp,
    Java,
    JavaScript,
    Kotlin,
    Php,
    Python,
    Ruby,
    Scala,
    Swift,
}

impl Language {
    /// Report column order.
    pub const ALL: [Language; 10] = [
        Language::CSharp,
        Language::Cpp,
        Language::Java,
        Language::JavaScript,
        Language::Kotlin,
        Language::Php,
        Language::Python,
        Language::Ruby,
        Language::Scala,
        Language::Swift,
    ];

    /// Stable identifier used in manifests, configs and result files.
    pub fn id(self) -> &'static str {
        match self {
            Language::CSharp => "csharp",
            Language::Cpp => "cpp",
            Language::Java => "java",
            Language::JavaScript => "javascript",
            Language::Kotlin => "kotlin",
            Language::Php => "php",
            Language::Python => "python",
            Language::Ruby => "ruby",
            Language::Scala => "scala",
            Language::Swift => "swift",
        }
    }

    /// Short column header used in score tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Language::CSharp => "C#",
            Language::Cpp => "CPP",
            Language::Java => "Java",
            Language::JavaScript => "JS",
            Language::Kotlin => "Kotlin",
            Language::Php => "PHP",
            Language::Python => "Python",
            Language::Ruby => "Ruby",
            Language::Scala => "Scala",
            Language::Swift => "Swift",
        }
    }

    pub fn from_id(id: &str) -> Option<Language> {
        Language::ALL.into_iter().find(|l| l.id() == id)
    }

    /// Fence info-string aliases from the built-in registry.
    pub fn aliases(self) -> &'static [String] {
        &LanguageRegistry::builtin()
            .get(self.id())
            .expect("every benchmark language is registered")
            .aliases
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown benchmark language {0:?}")]
pub struct UnknownLanguage(pub String);

impl FromStr for Language {
    type Err = UnknownLanguage;

    /// Accepts the canonical id or any registered alias, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageRegistry::builtin()
            .resolve(s)
            .and_then(|spec| Language::from_id(&spec.id))
            .ok_or_else(|| UnknownLanguage(s.to_string()))
    }
}

impl Serialize for Language {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Registry entry: alias set plus what the code renderer needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub id: String,
    pub display: String,
    #[serde(default)]
    pub benchmark: bool,
    pub aliases: Vec<String>,
    /// Pygments lexer name.
    pub lexer: String,
    #[serde(default)]
    pub line_comment: Option<String>,
    #[serde(default)]
    pub block_comment: Option<(String, String)>,
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl LanguageSpec {
    pub fn matches_alias(&self, tag: &str) -> bool {
        let tag = tag.trim();
        self.id.eq_ignore_ascii_case(tag) || self.aliases.iter().any(|a| a.eq_ignore_ascii_case(tag))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("reading language registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing language registry: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("language registry: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
struct RegistryFile {
    version: String,
    language: Vec<LanguageSpec>,
}

/// Versioned table of language ids and aliases.
#[derive(Debug, Clone)]
pub struct LanguageRegistry {
    version: String,
    specs: Vec<LanguageSpec>,
    by_alias: BTreeMap<String, usize>,
}

impl LanguageRegistry {
    /// The registry shipped in `config/languages.toml`.
    pub fn builtin() -> &'static LanguageRegistry {
        static REGISTRY: OnceLock<LanguageRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            LanguageRegistry::from_toml(BUILTIN_REGISTRY).expect("built-in language registry is valid")
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile = toml::from_str(text)?;
        let mut by_alias = BTreeMap::new();
        for (idx, spec) in file.language.iter().enumerate() {
            for alias in std::iter::once(&spec.id).chain(&spec.aliases) {
                let key = alias.to_ascii_lowercase();
                if let Some(prev) = by_alias.insert(key.clone(), idx) {
                    if prev != idx {
                        return Err(RegistryError::Invalid(format!(
                            "alias {key:?} claimed by both {} and {}",
                            file.language[prev].id, spec.id
                        )));
                    }
                }
            }
        }
        for lang in Language::ALL {
            let Some(&idx) = by_alias.get(lang.id()) else {
                return Err(RegistryError::Invalid(format!("benchmark language {lang} missing")));
            };
            if !file.language[idx].benchmark {
                return Err(RegistryError::Invalid(format!("{lang} must be marked benchmark = true")));
            }
        }
        Ok(LanguageRegistry {
            version: file.version,
            specs: file.language,
            by_alias,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, id: &str) -> Option<&LanguageSpec> {
        self.specs.iter().find(|s| s.id == id)
    }

    /// Looks a tag up by id or alias, case-insensitively.
    pub fn resolve(&self, tag: &str) -> Option<&LanguageSpec> {
        self.by_alias
            .get(&tag.trim().to_ascii_lowercase())
            .map(|&idx| &self.specs[idx])
    }

    pub fn specs(&self) -> &[LanguageSpec] {
        &self.specs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_benchmark_languages_registered() {
        let reg = LanguageRegistry::builtin();
        let bench: Vec<_> = reg.specs().iter().filter(|s| s.benchmark).map(|s| s.id.as_str()).collect();
        assert_eq!(bench.len(), 10);
        for lang in Language::ALL {
            assert!(bench.contains(&lang.id()));
        }
    }

    #[test]
    fn aliases_resolve_case_insensitively() {
        assert_eq!("C#".parse::<Language>().unwrap(), Language::CSharp);
        assert_eq!("csharp".parse::<Language>().unwrap(), Language::CSharp);
        assert_eq!("C++".parse::<Language>().unwrap(), Language::Cpp);
        assert_eq!("JS".parse::<Language>().unwrap(), Language::JavaScript);
        assert_eq!("py".parse::<Language>().unwrap(), Language::Python);
        assert!("typescript".parse::<Language>().is_err());
        assert!(LanguageRegistry::builtin().resolve("TS").is_some());
    }

    #[test]
    fn conflicting_alias_rejected() {
        let text = r#"
version = "x"
[[language]]
id = "a"
display = "A"
aliases = ["z"]
lexer = "text"
[[language]]
id = "b"
display = "B"
aliases = ["z"]
lexer = "text"
"#;
        assert!(matches!(LanguageRegistry::from_toml(text), Err(RegistryError::Invalid(_))));
    }

    #[test]
    fn serde_uses_canonical_id() {
        let json = serde_json::to_string(&Language::JavaScript).unwrap();
        assert_eq!(json, "\"javascript\"");
        let back: Language = serde_json::from_str("\"js\"").unwrap();
        assert_eq!(back, Language::JavaScript);
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_yaml::Value;
use thiserror::Error;

use crate::{Diagnostics, Mode};

static ORCID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}-\d{4}-\d{4}-\d{3}[\dX]$").unwrap());

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} is not valid UTF-8", .0.display())]
    InvalidUtf8(PathBuf),
    #[error("YAML syntax error at line {line}: {message}")]
    YamlSyntax { line: usize, message: String },
    #[error("invalid config field `{field}`: {reason}")]
    SchemaViolation { field: String, reason: String },
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::SchemaViolation {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Typed manuscript metadata read from `00_CONFIG.yml`.
///
/// Keys outside the schema are kept in `extra` so that they survive a
/// serialize/parse round trip; [`ManuscriptConfig::unknown_key_diagnostics`]
/// reports them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManuscriptConfig {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_title: Option<String>,
    #[serde(default)]
    pub authors: Vec<Author>,
    #[serde(default)]
    pub affiliations: Vec<Affiliation>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default = "default_bibliography")]
    pub bibliography: String,
    #[serde(default = "default_engine")]
    pub latex_engine: String,
    #[serde(default = "default_bib_processor")]
    pub bibliography_processor: String,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub generators: GeneratorCommands,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Author {
    pub name: String,
    #[serde(default)]
    pub affiliations: Vec<u32>,
    #[serde(default)]
    pub corresponding: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orcid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
}

/// An affiliation; written in YAML either as a plain string or as a
/// mapping with a `name` key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "AffiliationRepr", into = "String")]
pub struct Affiliation {
    pub name: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AffiliationRepr {
    Name(String),
    Full { name: String },
}

impl From<AffiliationRepr> for Affiliation {
    fn from(repr: AffiliationRepr) -> Self {
        match repr {
            AffiliationRepr::Name(name) | AffiliationRepr::Full { name } => Affiliation { name },
        }
    }
}

impl From<Affiliation> for String {
    fn from(aff: Affiliation) -> Self {
        aff.name
    }
}

/// Argument-vector prefixes used to invoke figure generators. The source
/// file path is appended by the runner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorCommands {
    pub mermaid: Vec<String>,
    pub python: Vec<String>,
    pub r: Vec<String>,
    pub timeout_seconds: u64,
}

impl Default for GeneratorCommands {
    fn default() -> Self {
        GeneratorCommands {
            mermaid: vec!["mmdc".into()],
            python: vec!["python3".into()],
            r: vec!["Rscript".into()],
            timeout_seconds: 300,
        }
    }
}

fn default_bibliography() -> String {
    super::BIBLIOGRAPHY_FILE.to_string()
}

fn default_engine() -> String {
    "pdflatex".to_string()
}

fn default_bib_processor() -> String {
    "bibtex".to_string()
}

impl ManuscriptConfig {
    /// A config with only a title; every other field takes its default.
    pub fn with_title(title: impl Into<String>) -> Self {
        ManuscriptConfig {
            title: title.into(),
            short_title: None,
            authors: Vec::new(),
            affiliations: Vec::new(),
            keywords: Vec::new(),
            bibliography: default_bibliography(),
            latex_engine: default_engine(),
            bibliography_processor: default_bib_processor(),
            strict: false,
            generators: GeneratorCommands::default(),
            extra: BTreeMap::new(),
        }
    }

    pub fn unknown_keys(&self) -> impl Iterator<Item = &str> {
        self.extra.keys().map(String::as_str)
    }

    /// One diagnostic per unrecognised top-level key; warnings in lenient
    /// mode, errors in strict mode.
    pub fn unknown_key_diagnostics(&self, mode: Mode) -> Diagnostics {
        let mut diags = Diagnostics::new();
        for key in self.unknown_keys() {
            diags.defect(
                mode,
                "UnknownConfigKey",
                format!("unknown config key `{key}` is ignored"),
            );
        }
        diags
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes to YAML")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.title.trim().is_empty() {
            return Err(schema("title", "must be non-empty"));
        }
        for (i, author) in self.authors.iter().enumerate() {
            let field = format!("authors[{i}]");
            if author.name.trim().is_empty() {
                return Err(schema(format!("{field}.name"), "must be non-empty"));
            }
            for &index in &author.affiliations {
                if index == 0 || index as usize > self.affiliations.len() {
                    return Err(schema(
                        format!("{field}.affiliations"),
                        format!(
                            "index {index} does not refer to one of the {} affiliations",
                            self.affiliations.len()
                        ),
                    ));
                }
            }
            if let Some(orcid) = &author.orcid {
                if !ORCID.is_match(orcid) {
                    return Err(schema(
                        format!("{field}.orcid"),
                        format!("`{orcid}` is not of the form 0000-0000-0000-000X"),
                    ));
                }
            }
        }
        if self.latex_engine.trim().is_empty() {
            return Err(schema("latex_engine", "must name a command"));
        }
        let generators = &self.generators;
        for (name, cmd) in [
            ("mermaid", &generators.mermaid),
            ("python", &generators.python),
            ("r", &generators.r),
        ] {
            if cmd.is_empty() {
                return Err(schema(format!("generators.{name}"), "command may not be empty"));
            }
        }
        if generators.timeout_seconds == 0 {
            return Err(schema("generators.timeout_seconds", "must be positive"));
        }
        Ok(())
    }
}

/// Reads and validates a manuscript config file.
pub fn parse_config(config_yaml: impl AsRef<Path>) -> Result<ManuscriptConfig, ConfigError> {
    let path = config_yaml.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|_| ConfigError::InvalidUtf8(path.to_path_buf()))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ManuscriptConfig, ConfigError> {
    let value: Value = serde_yaml::from_str(text).map_err(|e| ConfigError::YamlSyntax {
        line: e.location().map(|l| l.line()).unwrap_or(0),
        message: e.to_string(),
    })?;
    let mapping = match &value {
        Value::Mapping(m) => m,
        Value::Null => return Err(schema("title", "missing")),
        _ => return Err(schema("config", "top level must be a mapping")),
    };
    if !mapping.contains_key("title") {
        return Err(schema("title", "missing"));
    }
    let config: ManuscriptConfig = serde_yaml::from_value(value).map_err(|e| {
        let message = e.to_string();
        let field = message
            .split('`')
            .nth(1)
            .filter(|_| message.contains("field"))
            .unwrap_or("config")
            .to_string();
        schema(field, message)
    })?;
    config.validate()?;
    Ok(config)
}

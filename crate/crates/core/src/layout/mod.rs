//! Manuscript directory layout and configuration.

mod config;

pub use config::{
    parse_config, parse_config_str, Affiliation, Author, ConfigError, GeneratorCommands, ManuscriptConfig,
};

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_FILE: &str = "00_CONFIG.yml";
pub const MAIN_FILE: &str = "01_MAIN.md";
pub const SUPPLEMENTARY_FILE: &str = "02_SUPPLEMENTARY.md";
pub const BIBLIOGRAPHY_FILE: &str = "03_REFERENCES.bib";
pub const FIGURES_DIR: &str = "FIGURES";
pub const OUTPUT_DIR: &str = "output";

/// Which conventional manuscript file a [`LayoutError::MissingFile`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutFile {
    MainMarkdown,
    ConfigYaml,
    Bibliography,
}

impl fmt::Display for LayoutFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayoutFile::MainMarkdown => "main_md",
            LayoutFile::ConfigYaml => "config_yaml",
            LayoutFile::Bibliography => "bibliography",
        })
    }
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("manuscript directory {0} does not exist")]
    RootMissing(PathBuf),
    #[error("missing {file}: expected {}", path.display())]
    MissingFile { file: LayoutFile, path: PathBuf },
    #[error("{} exists but cannot be read: {source}", path.display())]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output directory {} would overwrite manuscript sources", .0.display())]
    OutputOverlapsSources(PathBuf),
}

/// The resolved file-system layout of one manuscript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManuscriptLayout {
    pub root_dir: PathBuf,
    pub main_md: PathBuf,
    pub supplementary_md: Option<PathBuf>,
    pub config_yaml: PathBuf,
    pub bibliography_bib: PathBuf,
    pub figures_dir: PathBuf,
    pub output_dir: PathBuf,
}

/// Resolves the conventional manuscript layout under `root_dir`.
///
/// Read-only: nothing is created, and the output directory does not need
/// to exist yet.
pub fn discover_layout(root_dir: impl AsRef<Path>) -> Result<ManuscriptLayout, LayoutError> {
    let root_dir = root_dir.as_ref();
    if !root_dir.is_dir() {
        return Err(LayoutError::RootMissing(root_dir.to_path_buf()));
    }

    let config_yaml = require(root_dir, CONFIG_FILE, LayoutFile::ConfigYaml)?;
    let main_md = require(root_dir, MAIN_FILE, LayoutFile::MainMarkdown)?;
    let bibliography_bib = require(root_dir, BIBLIOGRAPHY_FILE, LayoutFile::Bibliography)?;

    let supplementary = root_dir.join(SUPPLEMENTARY_FILE);
    let supplementary_md = supplementary.is_file().then_some(supplementary);

    Ok(ManuscriptLayout {
        root_dir: root_dir.to_path_buf(),
        main_md,
        supplementary_md,
        config_yaml,
        bibliography_bib,
        figures_dir: root_dir.join(FIGURES_DIR),
        output_dir: root_dir.join(OUTPUT_DIR),
    })
}

fn require(root: &Path, name: &str, file: LayoutFile) -> Result<PathBuf, LayoutError> {
    let path = root.join(name);
    if !path.is_file() {
        return Err(LayoutError::MissingFile { file, path });
    }
    File::open(&path).map_err(|source| LayoutError::Unreadable {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

impl ManuscriptLayout {
    /// Replaces the output directory, rejecting locations that coincide with
    /// the manuscript root or any source file or directory.
    pub fn with_output_dir(mut self, output_dir: impl Into<PathBuf>) -> Result<Self, LayoutError> {
        let output_dir = output_dir.into();
        let output_dir = if output_dir.is_relative() {
            self.root_dir.join(output_dir)
        } else {
            output_dir
        };
        let normalized = normalize(&output_dir);
        let mut sources = vec![
            &self.root_dir,
            &self.main_md,
            &self.config_yaml,
            &self.bibliography_bib,
            &self.figures_dir,
        ];
        if let Some(supp) = &self.supplementary_md {
            sources.push(supp);
        }
        if sources.iter().any(|s| normalize(s) == normalized) {
            return Err(LayoutError::OutputOverlapsSources(output_dir));
        }
        self.output_dir = output_dir;
        Ok(self)
    }

    /// Points the bibliography at `relative` (resolved against the manuscript
    /// root) when that file exists.
    pub fn with_bibliography(mut self, relative: &str) -> Self {
        let candidate = self.root_dir.join(relative);
        if candidate.is_file() {
            self.bibliography_bib = candidate;
        }
        self
    }

    /// Every markdown source, main document first.
    pub fn documents(&self) -> Vec<&Path> {
        let mut docs = vec![self.main_md.as_path()];
        if let Some(supp) = &self.supplementary_md {
            docs.push(supp);
        }
        docs
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output_dir.join(FIGURES_DIR).join(crate::figgen::MANIFEST_FILE)
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.output_dir.join("logs")
    }

    /// Path of `path` relative to the manuscript root, when it lies beneath it.
    pub fn relative<'a>(&self, path: &'a Path) -> &'a Path {
        path.strip_prefix(&self.root_dir).unwrap_or(path)
    }
}

fn normalize(path: &Path) -> PathBuf {
    use std::path::Component;
    let absolute = if path.is_absolute() {
        path.to_path_buf()
    } else {
        std::env::current_dir().unwrap_or_default().join(path)
    };
    let mut out = PathBuf::new();
    for component in absolute.components() {
        match component {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

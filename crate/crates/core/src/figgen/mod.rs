//! Cached programmatic figure generation.
//!
//! Figure sources under `FIGURES/` are classified by extension. Mermaid
//! diagrams and Python/R scripts are generators; their outputs are tracked in
//! a manifest so unchanged sources are not re-run.

mod manifest;
mod runner;
mod schedule;

pub use manifest::{CacheManifest, ManifestEntry, ManifestError, OutputRecord, MANIFEST_VERSION};
pub use runner::{run_generator, GeneratorError, GeneratorRun};
pub use schedule::{generate_all, GenerateOptions, GenerateOutcome, GenerationSummary};

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

/// File name of the cache manifest inside `output/FIGURES/`.
pub const MANIFEST_FILE: &str = ".rxiv_cache.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureKind {
    Mermaid,
    PyScript,
    RScript,
    Static,
    Tikz,
    Data,
}

impl FigureKind {
    /// Kind for a file extension, compared case-insensitively.
    pub fn from_extension(ext: &str) -> Option<FigureKind> {
        Some(match ext.to_ascii_lowercase().as_str() {
            "mmd" => FigureKind::Mermaid,
            "py" => FigureKind::PyScript,
            "r" => FigureKind::RScript,
            "png" | "jpg" | "jpeg" | "svg" | "pdf" => FigureKind::Static,
            "tex" | "tikz" => FigureKind::Tikz,
            "csv" | "json" | "xlsx" => FigureKind::Data,
            _ => return None,
        })
    }

    pub fn from_path(path: &Path) -> Option<FigureKind> {
        path.extension()
            .and_then(|e| e.to_str())
            .and_then(FigureKind::from_extension)
    }

    pub fn is_generator(self) -> bool {
        matches!(self, FigureKind::Mermaid | FigureKind::PyScript | FigureKind::RScript)
    }

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::Mermaid => "mermaid",
            FigureKind::PyScript => "pyscript",
            FigureKind::RScript => "rscript",
            FigureKind::Static => "static",
            FigureKind::Tikz => "tikz",
            FigureKind::Data => "data",
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Modification time as seconds and nanoseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub secs: i64,
    pub nanos: u32,
}

impl Timestamp {
    pub fn of(path: &Path) -> io::Result<Timestamp> {
        let modified = fs::metadata(path)?.modified()?;
        Ok(match modified.duration_since(UNIX_EPOCH) {
            Ok(d) => Timestamp {
                secs: d.as_secs() as i64,
                nanos: d.subsec_nanos(),
            },
            Err(e) => Timestamp {
                secs: -(e.duration().as_secs() as i64),
                nanos: 0,
            },
        })
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn hash_file(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureAsset {
    pub source_path: PathBuf,
    /// Path relative to the figures directory, `/`-separated; the manifest key.
    pub relative: String,
    pub kind: FigureKind,
    /// Outputs known before running: the three mermaid variants. Script
    /// outputs are discovered at run time and recorded in the manifest.
    pub expected_outputs: Vec<PathBuf>,
    pub source_mtime: Timestamp,
    pub source_hash: String,
    pub figures_dir: PathBuf,
}

impl FigureAsset {
    pub fn load(figures_dir: &Path, source_path: &Path) -> io::Result<Option<FigureAsset>> {
        let Some(kind) = FigureKind::from_path(source_path) else {
            return Ok(None);
        };
        let relative = source_path
            .strip_prefix(figures_dir)
            .unwrap_or(source_path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let expected_outputs = if kind == FigureKind::Mermaid {
            ["svg", "png", "pdf"]
                .iter()
                .map(|ext| source_path.with_extension(ext))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Some(FigureAsset {
            source_path: source_path.to_path_buf(),
            relative,
            kind,
            expected_outputs,
            source_mtime: Timestamp::of(source_path)?,
            source_hash: hash_file(source_path)?,
            figures_dir: figures_dir.to_path_buf(),
        }))
    }
}

fn hidden(name: &std::ffi::OsStr) -> bool {
    name.to_string_lossy().starts_with('.')
}

/// Lists figure sources under `figures_dir` in lexicographic order of their
/// relative paths. Hidden files and directories are skipped, as are files
/// with unrecognized extensions. A missing directory yields no assets.
pub fn scan_figures(figures_dir: &Path) -> io::Result<Vec<FigureAsset>> {
    if !figures_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut assets = Vec::new();
    let walker = WalkDir::new(figures_dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !hidden(e.file_name()));
    for entry in walker {
        let entry = entry.map_err(io::Error::other)?;
        if !entry.file_type().is_file() || entry.file_name() == MANIFEST_FILE {
            continue;
        }
        if let Some(asset) = FigureAsset::load(figures_dir, entry.path())? {
            assets.push(asset);
        }
    }
    assets.sort_by(|a, b| a.relative.cmp(&b.relative));
    Ok(assets)
}

/// Whether `asset` must be regenerated.
///
/// True when the asset is not in the manifest, an expected or recorded
/// output is missing, or the source content hash changed. A newer mtime with
/// an unchanged hash does not trigger regeneration.
pub fn needs_regeneration(asset: &FigureAsset, manifest: &CacheManifest) -> bool {
    let Some(entry) = manifest.entries.get(&asset.relative) else {
        return true;
    };
    let recorded = entry.outputs.iter().map(|o| asset.figures_dir.join(&o.path));
    if asset
        .expected_outputs
        .iter()
        .cloned()
        .chain(recorded)
        .any(|p| !p.is_file())
    {
        return true;
    }
    entry.hash != asset.source_hash
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive extension table, including case variants.
    #[test]
    fn extension_oracle() {
        let table = [
            ("mmd", Some(FigureKind::Mermaid)),
            ("py", Some(FigureKind::PyScript)),
            ("R", Some(FigureKind::RScript)),
            ("png", Some(FigureKind::Static)),
            ("jpg", Some(FigureKind::Static)),
            ("jpeg", Some(FigureKind::Static)),
            ("svg", Some(FigureKind::Static)),
            ("pdf", Some(FigureKind::Static)),
            ("tex", Some(FigureKind::Tikz)),
            ("tikz", Some(FigureKind::Tikz)),
            ("csv", Some(FigureKind::Data)),
            ("json", Some(FigureKind::Data)),
            ("xlsx", Some(FigureKind::Data)),
            ("md", None),
            ("txt", None),
            ("", None),
        ];
        for (ext, kind) in table {
            for variant in [ext.to_string(), ext.to_ascii_uppercase(), ext.to_ascii_lowercase()] {
                assert_eq!(FigureKind::from_extension(&variant), kind, "{variant}");
            }
        }
    }

    #[test]
    fn scan_orders_and_filters() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        for name in ["c.png", "a.MMD", "b.py", ".hidden.py", "notes.txt", MANIFEST_FILE] {
            fs::write(dir.join(name), name).unwrap();
        }
        fs::create_dir(dir.join("sub")).unwrap();
        fs::write(dir.join("sub/d.R"), "x").unwrap();
        fs::create_dir(dir.join(".cache")).unwrap();
        fs::write(dir.join(".cache/e.py"), "x").unwrap();

        let assets = scan_figures(dir).unwrap();
        let got: Vec<_> = assets.iter().map(|a| (a.relative.as_str(), a.kind)).collect();
        assert_eq!(
            got,
            [
                ("a.MMD", FigureKind::Mermaid),
                ("b.py", FigureKind::PyScript),
                ("c.png", FigureKind::Static),
                ("sub/d.R", FigureKind::RScript),
            ]
        );
        assert_eq!(assets[0].expected_outputs.len(), 3);
        assert!(assets[1].expected_outputs.is_empty());
    }

    #[test]
    fn scan_empty_or_missing() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(scan_figures(tmp.path()).unwrap().is_empty());
        assert!(scan_figures(&tmp.path().join("nope")).unwrap().is_empty());
    }

    fn entry_for(asset: &FigureAsset, outputs: &[&str]) -> ManifestEntry {
        ManifestEntry {
            hash: asset.source_hash.clone(),
            mtime: asset.source_mtime,
            outputs: outputs
                .iter()
                .map(|p| OutputRecord {
                    path: p.to_string(),
                    hash: String::new(),
                })
                .collect(),
        }
    }

    #[test]
    fn regeneration_decisions() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        fs::write(dir.join("plot.py"), "print(1)").unwrap();
        fs::write(dir.join("plot.png"), "png").unwrap();
        let asset = FigureAsset::load(dir, &dir.join("plot.py")).unwrap().unwrap();

        let mut manifest = CacheManifest::default();
        assert!(needs_regeneration(&asset, &manifest), "cold cache");

        manifest
            .entries
            .insert(asset.relative.clone(), entry_for(&asset, &["plot.png"]));
        assert!(!needs_regeneration(&asset, &manifest), "warm cache");

        // same bytes rewritten later: newer mtime, equal hash
        std::thread::sleep(std::time::Duration::from_millis(20));
        fs::write(dir.join("plot.py"), "print(1)").unwrap();
        let touched = FigureAsset::load(dir, &dir.join("plot.py")).unwrap().unwrap();
        assert!(touched.source_mtime > asset.source_mtime);
        assert!(!needs_regeneration(&touched, &manifest), "hash dominates mtime");

        fs::write(dir.join("plot.py"), "print(2)").unwrap();
        let edited = FigureAsset::load(dir, &dir.join("plot.py")).unwrap().unwrap();
        assert!(needs_regeneration(&edited, &manifest), "content changed");

        fs::remove_file(dir.join("plot.png")).unwrap();
        assert!(needs_regeneration(&asset, &manifest), "output missing");
    }
}

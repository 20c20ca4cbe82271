use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Timestamp;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the figures directory, `/`-separated.
    pub path: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub hash: String,
    pub mtime: Timestamp,
    pub outputs: Vec<OutputRecord>,
}

/// Persisted regeneration state, keyed by source path relative to the
/// figures directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub manifest_version: u32,
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl Default for CacheManifest {
    fn default() -> Self {
        CacheManifest {
            manifest_version: MANIFEST_VERSION,
            entries: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot access manifest {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("manifest {} is not valid: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("manifest {} has unsupported version {found}", path.display())]
    Version { path: PathBuf, found: u32 },
}

impl CacheManifest {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<CacheManifest, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Loads the manifest at `path`; a missing file is an empty manifest.
    pub fn load(path: &Path) -> Result<CacheManifest, ManifestError> {
        let text = match fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(CacheManifest::default()),
            Err(source) => {
                return Err(ManifestError::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        let manifest = CacheManifest::from_json(&text).map_err(|e| ManifestError::Corrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if manifest.manifest_version != MANIFEST_VERSION {
            return Err(ManifestError::Version {
                path: path.to_path_buf(),
                found: manifest.manifest_version,
            });
        }
        Ok(manifest)
    }

    /// Writes the manifest through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        let io_err = |source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()).map_err(io_err)?;
        fs::rename(&tmp, path).map_err(io_err)
    }
}

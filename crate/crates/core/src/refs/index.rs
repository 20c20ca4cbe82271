use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::protect::protect;
use crate::{Diagnostics, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Fig,
    Sfig,
    Table,
    Stable,
    Eq,
    Snote,
}

impl LabelKind {
    pub const ALL: [LabelKind; 6] = [
        LabelKind::Fig,
        LabelKind::Sfig,
        LabelKind::Table,
        LabelKind::Stable,
        LabelKind::Eq,
        LabelKind::Snote,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            LabelKind::Fig => "fig",
            LabelKind::Sfig => "sfig",
            LabelKind::Table => "table",
            LabelKind::Stable => "stable",
            LabelKind::Eq => "eq",
            LabelKind::Snote => "snote",
        }
    }

    pub fn from_prefix(prefix: &str) -> Option<LabelKind> {
        LabelKind::ALL.into_iter().find(|k| k.prefix() == prefix)
    }

    /// The kind of a full label such as `fig:overview`.
    pub fn of_label(label: &str) -> Option<LabelKind> {
        label.split_once(':').and_then(|(p, _)| LabelKind::from_prefix(p))
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub file: PathBuf,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file.display(), self.line)
    }
}

/// Every label defined across the manuscript documents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelIndex {
    labels: BTreeMap<String, (LabelKind, Location)>,
}

impl LabelIndex {
    /// Adds a label, returning the earlier location if it is already defined.
    pub fn insert(&mut self, label: &str, location: Location) -> Result<(), Location> {
        let kind = LabelKind::of_label(label).expect("label carries a known kind prefix");
        if let Some((_, first)) = self.labels.get(label) {
            return Err(first.clone());
        }
        self.labels.insert(label.to_string(), (kind, location));
        Ok(())
    }

    /// Builds an index from bare labels, all located at line 1 of an unnamed file.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut index = LabelIndex::default();
        for label in labels {
            let _ = index.insert(
                label,
                Location {
                    file: PathBuf::new(),
                    line: 1,
                },
            );
        }
        index
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains_key(label)
    }

    pub fn kind(&self, label: &str) -> Option<LabelKind> {
        self.labels.get(label).map(|(k, _)| *k)
    }

    pub fn location(&self, label: &str) -> Option<&Location> {
        self.labels.get(label).map(|(_, l)| l)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in lexicographic order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn without(&self, label: &str) -> LabelIndex {
        let mut copy = self.clone();
        copy.labels.remove(label);
        copy
    }
}

/// `{#kind:id ...}` attribute blocks.
pub(crate) static LABEL_ATTR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{\s*#(fig|sfig|table|stable|eq|snote):([A-Za-z0-9_-]+)(?:\s[^}\n]*)?\}").unwrap());

/// Collects every `{#kind:id}` definition from `documents` (name, text).
///
/// Code and math are protected first, so attributes inside them do not count.
pub fn build_label_index<P: AsRef<Path>, S: AsRef<str>>(documents: &[(P, S)]) -> (LabelIndex, Diagnostics) {
    let mut index = LabelIndex::default();
    let mut diags = Diagnostics::new();
    for (name, text) in documents {
        let name = name.as_ref();
        let Ok((doc, _)) = protect(text.as_ref(), Mode::Lenient) else {
            continue;
        };
        for caps in LABEL_ATTR.captures_iter(doc.text()) {
            let whole = caps.get(0).unwrap();
            let label = format!("{}:{}", &caps[1], &caps[2]);
            let location = Location {
                file: name.to_path_buf(),
                line: doc.source_line(whole.start()),
            };
            if let Err(first) = index.insert(&label, location.clone()) {
                let d = diags.error(
                    "DuplicateLabel",
                    format!("label `{label}` defined at {location} was already defined at {first}"),
                );
                d.file = Some(location.file);
                d.line = Some(location.line);
            }
        }
    }
    (index, diags)
}

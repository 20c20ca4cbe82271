//! Build diagnostics shared by every stage.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Notice,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Notice => "notice",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl Diagnostic {
    pub fn new(severity: Severity, code: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity,
            code: code.into(),
            message: message.into(),
            file: None,
            line: None,
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn in_file(mut self, file: impl Into<PathBuf>) -> Self {
        self.file = Some(file.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.severity, self.code)?;
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, " {}:{}", file.display(), line)?,
            (Some(file), None) => write!(f, " {}", file.display())?,
            (None, Some(line)) => write!(f, " line {line}")?,
            (None, None) => {}
        }
        write!(f, ": {}", self.message)
    }
}

/// An ordered collection of diagnostics.
///
/// Items keep insertion order until [`Diagnostics::sort`] is called, which
/// orders them by `(file, line, code)` with a stable sort.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Diagnostics {
    items: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, diagnostic: Diagnostic) {
        self.items.push(diagnostic);
    }

    pub fn error(&mut self, code: &str, message: impl Into<String>) -> &mut Diagnostic {
        self.add(Severity::Error, code, message)
    }

    pub fn warning(&mut self, code: &str, message: impl Into<String>) -> &mut Diagnostic {
        self.add(Severity::Warning, code, message)
    }

    pub fn notice(&mut self, code: &str, message: impl Into<String>) -> &mut Diagnostic {
        self.add(Severity::Notice, code, message)
    }

    /// Records a manuscript defect: a warning in lenient mode, an error in strict mode.
    pub fn defect(&mut self, mode: Mode, code: &str, message: impl Into<String>) -> &mut Diagnostic {
        self.add(mode.defect_severity(), code, message)
    }

    pub fn add(&mut self, severity: Severity, code: &str, message: impl Into<String>) -> &mut Diagnostic {
        self.items.push(Diagnostic::new(severity, code, message));
        self.items.last_mut().expect("just pushed")
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.items.extend(other.items);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Diagnostic> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count(&self, severity: Severity) -> usize {
        self.items.iter().filter(|d| d.severity == severity).count()
    }

    pub fn error_count(&self) -> usize {
        self.count(Severity::Error)
    }

    pub fn has_errors(&self) -> bool {
        self.items.iter().any(Diagnostic::is_error)
    }

    pub fn with_code<'a>(&'a self, code: &'a str) -> impl Iterator<Item = &'a Diagnostic> + 'a {
        self.items.iter().filter(move |d| d.code == code)
    }

    /// Attaches `file` to every diagnostic that does not carry one yet.
    pub fn stamp_file(&mut self, file: &Path) {
        for item in &mut self.items {
            if item.file.is_none() {
                item.file = Some(file.to_path_buf());
            }
        }
    }

    pub fn sort(&mut self) {
        self.items
            .sort_by(|a, b| (&a.file, a.line, &a.code).cmp(&(&b.file, b.line, &b.code)));
    }

    pub fn into_vec(self) -> Vec<Diagnostic> {
        self.items
    }
}

impl From<Vec<Diagnostic>> for Diagnostics {
    fn from(items: Vec<Diagnostic>) -> Self {
        Diagnostics { items }
    }
}

impl IntoIterator for Diagnostics {
    type Item = Diagnostic;
    type IntoIter = std::vec::IntoIter<Diagnostic>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.into_iter()
    }
}

impl<'a> IntoIterator for &'a Diagnostics {
    type Item = &'a Diagnostic;
    type IntoIter = std::slice::Iter<'a, Diagnostic>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_orders_by_file_line_code() {
        let mut diags = Diagnostics::new();
        diags.warning("B", "x").line = Some(3);
        diags.error("A", "y").line = Some(3);
        diags.notice("C", "z").line = Some(1);
        diags.sort();
        let codes: Vec<_> = diags.iter().map(|d| d.code.as_str()).collect();
        assert_eq!(codes, ["C", "A", "B"]);
    }

    #[test]
    fn defect_severity_follows_mode() {
        let mut diags = Diagnostics::new();
        diags.defect(Mode::Lenient, "UnknownCitation", "x");
        diags.defect(Mode::Strict, "UnknownCitation", "x");
        assert_eq!(diags.error_count(), 1);
        assert_eq!(diags.count(Severity::Warning), 1);
    }

    #[test]
    fn display_includes_location() {
        let d = Diagnostic::new(Severity::Error, "RaggedRow", "bad row")
            .in_file("01_MAIN.md")
            .at_line(7);
        assert_eq!(d.to_string(), "error[RaggedRow] 01_MAIN.md:7: bad row");
    }
}

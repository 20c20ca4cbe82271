use std::path::PathBuf;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Bibliography, LabelKind};
use crate::protect::ProtectedText;
use crate::Diagnostics;

/// How `@snote:` references are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnoteStyle {
    /// `\ref{snote:x}`, resolved against the note's label.
    #[default]
    Ref,
    /// `\sidenote{x}`, for templates that define that macro.
    Sidenote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationOccurrence {
    pub key: String,
    /// Span of `@key` in the text handed to the citation pass.
    pub byte_span: (usize, usize),
    pub grouped: bool,
    pub line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossrefOccurrence {
    pub label: String,
    pub byte_span: (usize, usize),
    pub line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

static KINDED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@([A-Za-z]+):([A-Za-z0-9_-]+)").unwrap());

fn word_before(text: &str, pos: usize) -> bool {
    text[..pos]
        .chars()
        .next_back()
        .is_some_and(|c| c.is_alphanumeric() || c == '_')
}

/// Applies `(start, end, latex)` replacements in order, emitting each as a token.
fn splice(doc: &mut ProtectedText, replacements: Vec<(usize, usize, String)>) {
    if replacements.is_empty() {
        return;
    }
    let text = doc.text().to_string();
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (start, end, latex) in replacements {
        out.push_str(&text[last..start]);
        let token = doc.emit(latex);
        out.push_str(&token);
        last = end;
    }
    out.push_str(&text[last..]);
    doc.set_text(out);
}

/// Converts `@fig:x`-style references.
///
/// Unknown kind prefixes stay as text with a warning, unless the whole
/// token is a bibliography key, which the citation pass then handles.
/// Resolution against the index happens in [`super::validate_references`].
pub fn convert_crossrefs(
    doc: &mut ProtectedText,
    bib: &Bibliography,
    style: SnoteStyle,
    diags: &mut Diagnostics,
) -> Vec<CrossrefOccurrence> {
    let mut occurrences = Vec::new();
    let mut replacements = Vec::new();
    for caps in KINDED.captures_iter(doc.text()) {
        let whole = caps.get(0).unwrap();
        if word_before(doc.text(), whole.start()) {
            continue;
        }
        let label = &whole.as_str()[1..];
        let Some(kind) = LabelKind::from_prefix(&caps[1]) else {
            if !bib.contains(label) {
                diags
                    .warning(
                        "UnknownReferenceKind",
                        format!("`@{label}` has an unknown reference prefix; left as text"),
                    )
                    .line = Some(doc.source_line(whole.start()));
            }
            continue;
        };
        let latex = match (kind, style) {
            (LabelKind::Eq, _) => format!("\\eqref{{{label}}}"),
            (LabelKind::Snote, SnoteStyle::Sidenote) => format!("\\sidenote{{{}}}", &caps[2]),
            _ => format!("\\ref{{{label}}}"),
        };
        occurrences.push(CrossrefOccurrence {
            label: label.to_string(),
            byte_span: (whole.start(), whole.end()),
            line: doc.source_line(whole.start()),
            file: None,
        });
        replacements.push((whole.start(), whole.end(), latex));
    }
    splice(doc, replacements);
    occurrences
}

fn key_len(text: &str, at: usize) -> usize {
    let bytes = text.as_bytes();
    if !bytes.get(at).is_some_and(u8::is_ascii_alphanumeric) {
        return 0;
    }
    let mut len = 1;
    while bytes
        .get(at + len)
        .is_some_and(|&b| b.is_ascii_alphanumeric() || b"_:.+-".contains(&b))
    {
        len += 1;
    }
    while len > 0 && matches!(bytes[at + len - 1], b'.' | b':') {
        len -= 1;
    }
    len
}

/// Keys that look like `prefix:rest` with an alphabetic prefix are
/// reference-shaped; unless the bibliography knows them they are never cited.
fn citable(key: &str, bib: &Bibliography) -> bool {
    if bib.contains(key) {
        return true;
    }
    match key.split_once(':') {
        Some((prefix, _)) => !prefix.chars().all(|c| c.is_ascii_alphabetic()),
        None => true,
    }
}

fn may_start_citation(text: &str, at: usize) -> bool {
    text[..at]
        .chars()
        .next_back()
        .is_none_or(|c| c.is_whitespace() || "([{;,\"'".contains(c))
}

/// Parses `[@a; @b]` starting at `open`; returns the end and `(start, end)` of each `@key`.
fn parse_group(text: &str, open: usize, bib: &Bibliography) -> Option<(usize, Vec<(usize, usize)>)> {
    let bytes = text.as_bytes();
    let skip_ws = |mut i: usize| {
        while bytes.get(i).is_some_and(|&b| b == b' ' || b == b'\t' || b == b'\n') {
            i += 1;
        }
        i
    };
    let mut keys = Vec::new();
    let mut i = skip_ws(open + 1);
    loop {
        if bytes.get(i) != Some(&b'@') {
            return None;
        }
        let len = key_len(text, i + 1);
        if len == 0 || !citable(&text[i + 1..i + 1 + len], bib) {
            return None;
        }
        keys.push((i, i + 1 + len));
        i = skip_ws(i + 1 + len);
        match bytes.get(i) {
            Some(b';') => i = skip_ws(i + 1),
            Some(b']') => return Some((i + 1, keys)),
            _ => return None,
        }
    }
}

/// Converts `@key` and `[@a; @b]` into `\cite`.
///
/// Must run after [`convert_crossrefs`]. Keys are not checked against the
/// bibliography here; see [`super::validate_references`].
pub fn convert_citations(doc: &mut ProtectedText, bib: &Bibliography) -> Vec<CitationOccurrence> {
    let text = doc.text().to_string();
    let bytes = text.as_bytes();
    let mut occurrences = Vec::new();
    let mut replacements = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'[' => {
                if let Some((end, keys)) = parse_group(&text, i, bib) {
                    let names: Vec<&str> = keys.iter().map(|&(s, e)| &text[s + 1..e]).collect();
                    for &(s, e) in &keys {
                        occurrences.push(CitationOccurrence {
                            key: text[s + 1..e].to_string(),
                            byte_span: (s, e),
                            grouped: true,
                            line: doc.source_line(s),
                            file: None,
                        });
                    }
                    replacements.push((i, end, format!("\\cite{{{}}}", names.join(","))));
                    i = end;
                    continue;
                }
            }
            b'@' if may_start_citation(&text, i) => {
                let len = key_len(&text, i + 1);
                let key = &text[i + 1..i + 1 + len];
                if len > 0 && citable(key, bib) {
                    occurrences.push(CitationOccurrence {
                        key: key.to_string(),
                        byte_span: (i, i + 1 + len),
                        grouped: false,
                        line: doc.source_line(i),
                        file: None,
                    });
                    replacements.push((i, i + 1 + len, format!("\\cite{{{key}}}")));
                    i += 1 + len;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    splice(doc, replacements);
    occurrences
}

/// Finds citations and cross-references in raw markdown without converting it.
pub fn scan_references(markdown: &str) -> (Vec<CitationOccurrence>, Vec<CrossrefOccurrence>) {
    let Ok((mut doc, _)) = crate::protect::protect(markdown, crate::Mode::Lenient) else {
        return (Vec::new(), Vec::new());
    };
    let bib = Bibliography::default();
    let mut ignored = Diagnostics::new();
    let crossrefs = convert_crossrefs(&mut doc, &bib, SnoteStyle::Ref, &mut ignored);
    let citations = convert_citations(&mut doc, &bib);
    (citations, crossrefs)
}

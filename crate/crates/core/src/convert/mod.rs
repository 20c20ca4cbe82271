//! Markdown to LaTeX conversion.
//!
//! [`convert_document`] protects the input and then runs a fixed sequence of
//! passes over the protected text. Every pass that produces LaTeX registers
//! it as a new protected slot, so later passes (and prose escaping) never see
//! raw LaTeX. Only prose stays visible until the final restore.

mod blocks;
mod code;
mod equations;
mod figures;
mod inline;
mod links;
mod tables;

pub use blocks::{convert_anchors, convert_headers, convert_lists, convert_page_controls};
pub use code::{escape_plain, escape_prose, render_code_slots};
pub use equations::convert_equation_blocks;
pub use figures::{convert_figures, FigureDirective};
pub use inline::{convert_emphasis, convert_subsuperscript};
pub use links::convert_links;
pub use tables::{convert_tables, Alignment, TableDirective};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protect::{protect, ProtectError, ProtectedText};
use crate::refs::{
    convert_citations, convert_crossrefs, validate_references, Bibliography, CitationOccurrence, CrossrefOccurrence,
    LabelIndex, SnoteStyle,
};
use crate::{Diagnostics, Mode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatexFragment {
    pub content: String,
    pub required_packages: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeStyle {
    /// Leave `°` in place for engines that handle UTF-8 input.
    #[default]
    Unicode,
    /// Emit `\textdegree{}`.
    Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvertOptions {
    pub mode: Mode,
    pub snote_style: SnoteStyle,
    pub degree: DegreeStyle,
    /// Check citations and cross-references against the bibliography and
    /// label index once conversion finishes.
    pub validate_references: bool,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            mode: Mode::Lenient,
            snote_style: SnoteStyle::Ref,
            degree: DegreeStyle::Unicode,
            validate_references: true,
        }
    }
}

impl ConvertOptions {
    pub fn strict() -> Self {
        ConvertOptions {
            mode: Mode::Strict,
            ..Default::default()
        }
    }
}

/// Everything one document's conversion produced.
#[derive(Debug, Clone)]
pub struct ConvertOutput {
    pub fragment: LatexFragment,
    pub diagnostics: Diagnostics,
    pub figures: Vec<FigureDirective>,
    pub tables: Vec<TableDirective>,
    pub citations: Vec<CitationOccurrence>,
    pub crossrefs: Vec<CrossrefOccurrence>,
}

/// Conversion could not produce output, or strict mode rejected it.
#[derive(Debug, Clone, Error)]
#[error("conversion failed with {} error(s)", .diagnostics.error_count())]
pub struct ConvertFailure {
    pub diagnostics: Diagnostics,
}

fn protect_failure(err: ProtectError) -> Diagnostics {
    let (code, line) = match err {
        ProtectError::UnterminatedFence { line } => ("UnterminatedFence", line),
        ProtectError::UnbalancedMathDelimiter { line } => ("UnbalancedMathDelimiter", line),
    };
    let mut diags = Diagnostics::new();
    diags.error(code, err.to_string()).line = Some(line);
    diags
}

/// Converts one markdown document to a LaTeX fragment.
///
/// Pass order: protect, equation blocks, cross-references, citations,
/// figures, tables, headers, label anchors, lists, links, emphasis,
/// sub/superscript, page controls, prose escaping, code rendering, restore.
pub fn convert_document(
    input: &str,
    index: &LabelIndex,
    bib: &Bibliography,
    options: &ConvertOptions,
) -> Result<ConvertOutput, ConvertFailure> {
    let mode = options.mode;
    let (mut doc, mut diags) = protect(input, mode).map_err(|e| ConvertFailure {
        diagnostics: protect_failure(e),
    })?;

    convert_equation_blocks(&mut doc, &mut diags);
    let crossrefs = convert_crossrefs(&mut doc, bib, options.snote_style, &mut diags);
    let citations = convert_citations(&mut doc, bib);
    let figures = convert_figures(&mut doc, mode, &mut diags);
    let tables = convert_tables(&mut doc, &mut diags);
    convert_headers(&mut doc, &mut diags);
    convert_anchors(&mut doc);
    convert_lists(&mut doc);
    convert_links(&mut doc, &mut diags);
    convert_emphasis(&mut doc, &mut diags);
    convert_subsuperscript(&mut doc);
    convert_page_controls(&mut doc);
    escape_prose(&mut doc, options.degree);
    render_code_slots(&mut doc);

    let content = doc.restore().map_err(|e| {
        let mut diagnostics = diags.clone();
        diagnostics.error("MissingPlaceholder", e.to_string());
        ConvertFailure { diagnostics }
    })?;

    if options.validate_references {
        diags.extend(validate_references(&citations, &crossrefs, index, bib, mode));
    }
    if mode.is_strict() && diags.has_errors() {
        return Err(ConvertFailure { diagnostics: diags });
    }
    let required_packages = required_packages(&content);
    Ok(ConvertOutput {
        fragment: LatexFragment {
            content,
            required_packages,
        },
        diagnostics: diags,
        figures,
        tables,
        citations,
        crossrefs,
    })
}

fn required_packages(content: &str) -> BTreeSet<String> {
    let needs = [
        ("\\includegraphics", "graphicx"),
        ("\\href", "hyperref"),
        ("\\url", "hyperref"),
        ("\\eqref", "amsmath"),
        ("\\begin{equation}", "amsmath"),
        ("\\begin{sfigure}", "float"),
        ("\\textdegree", "textcomp"),
    ];
    needs
        .iter()
        .filter(|(marker, _)| content.contains(marker))
        .map(|(_, pkg)| pkg.to_string())
        .collect()
}

/// Rebuilds a document's text left to right, turning emitted LaTeX into
/// protected slots.
pub(crate) struct Rewriter<'a> {
    doc: &'a mut ProtectedText,
    src: String,
    out: String,
    last: usize,
}

impl<'a> Rewriter<'a> {
    pub(crate) fn new(doc: &'a mut ProtectedText) -> Self {
        let src = doc.text().to_string();
        Rewriter {
            out: String::with_capacity(src.len()),
            doc,
            src,
            last: 0,
        }
    }

    pub(crate) fn src(&self) -> &str {
        &self.src
    }

    /// Source line of `pos` in the text as it was when the rewriter started.
    pub(crate) fn line(&self, pos: usize) -> usize {
        self.doc.source_line(pos)
    }

    /// Keeps the original text up to `pos` and moves past it.
    pub(crate) fn keep_to(&mut self, pos: usize) {
        if pos > self.last {
            self.out.push_str(&self.src[self.last..pos]);
            self.last = pos;
        }
    }

    /// Drops the original text up to `pos`.
    pub(crate) fn skip_to(&mut self, pos: usize) {
        self.last = self.last.max(pos);
    }

    pub(crate) fn latex(&mut self, latex: impl Into<String>) {
        let token = self.doc.emit(latex);
        self.out.push_str(&token);
    }

    pub(crate) fn text(&mut self, text: &str) {
        self.out.push_str(text);
    }

    pub(crate) fn finish(mut self) {
        let rest = &self.src[self.last..];
        self.out.push_str(rest);
        self.doc.set_text(self.out);
    }
}

/// Lines of `text` as `(start, end)` byte ranges, newline excluded.
pub(crate) fn line_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, b) in text.bytes().enumerate() {
        if b == b'\n' {
            spans.push((start, i));
            start = i + 1;
        }
    }
    spans.push((start, text.len()));
    spans
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Protects `input`, runs `pass`, and restores.
    pub fn run(input: &str, pass: impl FnOnce(&mut ProtectedText, &mut Diagnostics)) -> (String, Diagnostics) {
        let (mut doc, mut diags) = protect(input, Mode::Lenient).unwrap();
        pass(&mut doc, &mut diags);
        (doc.restore().unwrap(), diags)
    }
}

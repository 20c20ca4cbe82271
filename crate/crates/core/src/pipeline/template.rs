use std::fmt::Write;

use crate::convert::{convert_document, ConvertOptions, LatexFragment};
use crate::layout::ManuscriptConfig;
use crate::refs::{Bibliography, LabelIndex};

/// Packages the preamble always loads.
pub const BASE_PACKAGES: [&str; 9] = [
    "inputenc", "fontenc", "amsmath", "amssymb", "graphicx", "float", "textcomp", "authblk", "hyperref",
];

/// What goes around the converted main body.
#[derive(Debug, Clone)]
pub struct MainDocument<'a> {
    pub config: &'a ManuscriptConfig,
    pub body: &'a LatexFragment,
    pub supplementary: Option<&'a LatexFragment>,
    /// File name stem of the staged `.bib`, or `None` when nothing is cited.
    pub bibliography: Option<&'a str>,
    /// File name stem of the supplementary `.tex` to `\input`.
    pub supplementary_input: &'a str,
}

/// Converts a short markdown string such as a title to inline LaTeX.
fn inline(markdown: &str) -> String {
    let options = ConvertOptions {
        validate_references: false,
        ..ConvertOptions::default()
    };
    match convert_document(markdown, &LabelIndex::default(), &Bibliography::default(), &options) {
        Ok(out) => out.fragment.content.trim().to_string(),
        Err(_) => crate::convert::escape_plain(markdown),
    }
}

/// Renders the complete main `.tex` file. The output depends only on the
/// inputs, so unchanged sources give byte-identical files.
pub fn render_main_tex(doc: &MainDocument<'_>) -> String {
    let config = doc.config;
    let mut t = String::new();
    t.push_str("\\documentclass[10pt,a4paper]{article}\n");
    t.push_str("\\usepackage[utf8]{inputenc}\n\\usepackage[T1]{fontenc}\n");
    t.push_str("\\usepackage{amsmath,amssymb}\n\\usepackage{graphicx}\n\\usepackage{float}\n");
    t.push_str("\\usepackage{textcomp}\n\\usepackage{authblk}\n");
    let mut extra: Vec<&String> = doc
        .body
        .required_packages
        .iter()
        .chain(doc.supplementary.iter().flat_map(|s| s.required_packages.iter()))
        .filter(|p| !BASE_PACKAGES.contains(&p.as_str()))
        .collect();
    extra.sort();
    extra.dedup();
    for pkg in extra {
        let _ = writeln!(t, "\\usepackage{{{pkg}}}");
    }
    t.push_str("\\usepackage{hyperref}\n\n");
    t.push_str("\\newfloat{sfigure}{tbp}{losf}\n\\floatname{sfigure}{Supplementary Figure}\n");
    t.push_str("\\providecommand{\\sidenote}[1]{\\ref{#1}}\n\n");

    let _ = writeln!(t, "\\title{{{}}}", inline(&config.title));
    for author in &config.authors {
        let marks: Vec<String> = author.affiliations.iter().map(u32::to_string).collect();
        let mut name = inline(&author.name);
        if author.corresponding {
            if let Some(email) = &author.email {
                let _ = write!(
                    name,
                    "\\thanks{{Correspondence: \\texttt{{{}}}}}",
                    crate::convert::escape_plain(email)
                );
            }
        }
        let _ = writeln!(t, "\\author[{}]{{{name}}}", marks.join(","));
    }
    for (i, affiliation) in config.affiliations.iter().enumerate() {
        let _ = writeln!(t, "\\affil[{}]{{{}}}", i + 1, inline(&affiliation.name));
    }
    t.push_str("\\date{}\n\n\\begin{document}\n\\maketitle\n\n");
    if !config.keywords.is_empty() {
        let words: Vec<String> = config.keywords.iter().map(|k| inline(k)).collect();
        let _ = writeln!(t, "\\noindent\\textbf{{Keywords:}} {}\n", words.join(" | "));
    }
    t.push_str(doc.body.content.trim_end());
    t.push_str("\n\n");
    if let Some(bib) = doc.bibliography {
        let _ = writeln!(t, "\\bibliographystyle{{unsrt}}\n\\bibliography{{{bib}}}\n");
    }
    if doc.supplementary.is_some() {
        let _ = writeln!(t, "\\clearpage\n\\input{{{}}}\n", doc.supplementary_input);
    }
    t.push_str("\\end{document}\n");
    t
}

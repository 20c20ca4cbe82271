use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{line_spans, Rewriter};
use crate::protect::ProtectedText;
use crate::{Diagnostics, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureDirective {
    pub caption_markdown: String,
    pub path: PathBuf,
    pub label: Option<String>,
    /// Fraction of the line width, in `(0, 1]`.
    pub width: f64,
    pub position: String,
    pub span_two_columns: bool,
    pub line: usize,
}

impl FigureDirective {
    pub fn is_supplementary(&self) -> bool {
        self.label.as_deref().is_some_and(|l| l.starts_with("sfig:"))
    }
}

static FIGURE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^!\[(.*)\]\(([^()\s]+)\)(?:\{([^{}]*)\})?$").unwrap());

static FIGURE_LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^s?fig:[A-Za-z0-9_-]+$").unwrap());

const GENERATED_SOURCES: [&str; 3] = ["mmd", "py", "r"];

fn extension(path: &str) -> String {
    Path::new(path)
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

/// Parses `#label key=value ...`. Returns the directive fields and any
/// problems as `(is_error, message)`.
fn parse_attributes(attrs: &str, fig: &mut FigureDirective) -> Vec<(bool, String)> {
    let mut problems = Vec::new();
    for item in attrs.split_whitespace() {
        if let Some(label) = item.strip_prefix('#') {
            if FIGURE_LABEL.is_match(label) {
                fig.label = Some(label.to_string());
            } else {
                problems.push((true, format!("`{item}` is not a fig: or sfig: label")));
            }
            continue;
        }
        let Some((key, value)) = item.split_once('=') else {
            problems.push((true, format!("`{item}` is not `key=value`")));
            continue;
        };
        let value = value.trim_matches('"');
        match key {
            "width" => match parse_width(value) {
                Some(w) => fig.width = w,
                None => problems.push((true, format!("width `{value}` must be in (0, 1] or a percentage"))),
            },
            "position" | "placement" => {
                if !value.is_empty() && value.chars().all(|c| "htbpH!".contains(c)) {
                    fig.position = value.to_string();
                } else {
                    problems.push((true, format!("placement `{value}` is not a float specifier")));
                }
            }
            "span" => match value {
                "2col" => fig.span_two_columns = true,
                "1col" => fig.span_two_columns = false,
                _ => problems.push((true, format!("span `{value}` must be 1col or 2col"))),
            },
            _ => problems.push((false, format!("unknown figure attribute `{key}` ignored"))),
        }
    }
    problems
}

fn parse_width(value: &str) -> Option<f64> {
    let w = match value.strip_suffix('%') {
        Some(pct) => pct.parse::<f64>().ok()? / 100.0,
        None => value.parse::<f64>().ok()?,
    };
    (w > 0.0 && w <= 1.0).then_some(w)
}

fn format_width(w: f64) -> String {
    if w.fract() == 0.0 {
        format!("{w:.1}")
    } else {
        format!("{w}")
    }
}

/// The graphics command for `path`. Generator sources are referenced without
/// extension so the LaTeX engine picks the generated variant; TikZ sources
/// are `\input`.
fn graphic(fig: &FigureDirective) -> String {
    let path = fig.path.to_string_lossy().replace('\\', "/");
    let ext = extension(&path);
    if ext == "tex" || ext == "tikz" {
        return format!("\\input{{{path}}}");
    }
    let target = if GENERATED_SOURCES.contains(&ext.as_str()) {
        path[..path.len() - ext.len() - 1].to_string()
    } else {
        path
    };
    let unit = if fig.span_two_columns && !fig.is_supplementary() {
        "\\textwidth"
    } else {
        "\\linewidth"
    };
    format!("\\includegraphics[width={}{unit}]{{{target}}}", format_width(fig.width))
}

/// Converts standalone `![caption](path){#fig:label width=... }` lines into
/// figure environments. `sfig:` labels use the `sfigure` float; `span=2col`
/// selects `figure*`. The caption stays markdown for the later passes.
pub fn convert_figures(doc: &mut ProtectedText, mode: Mode, diags: &mut Diagnostics) -> Vec<FigureDirective> {
    let mut rw = Rewriter::new(doc);
    let src = rw.src().to_string();
    let mut figures = Vec::new();
    for (start, end) in line_spans(&src) {
        let raw = &src[start..end];
        let Some(caps) = FIGURE_LINE.captures(raw.trim()) else {
            continue;
        };
        let line = rw.line(start);
        let mut fig = FigureDirective {
            caption_markdown: caps[1].to_string(),
            path: PathBuf::from(&caps[2]),
            label: None,
            width: 1.0,
            position: "t".to_string(),
            span_two_columns: false,
            line,
        };
        if let Some(attrs) = caps.get(3) {
            for (is_error, message) in parse_attributes(attrs.as_str(), &mut fig) {
                let code = if is_error {
                    "MalformedAttributes"
                } else {
                    "UnknownAttribute"
                };
                let d = if is_error {
                    diags.error(code, message)
                } else {
                    diags.warning(code, message)
                };
                d.line = Some(line);
            }
        }
        if fig.label.is_none() && mode.is_strict() {
            diags
                .warning(
                    "UnlabeledFigure",
                    format!("figure `{}` has no label", fig.path.display()),
                )
                .line = Some(line);
        }
        let environment = if fig.is_supplementary() {
            "sfigure"
        } else if fig.span_two_columns {
            "figure*"
        } else {
            "figure"
        };
        let leading = raw.len() - raw.trim_start().len();
        rw.keep_to(start + leading);
        rw.skip_to(start + raw.trim_end().len());
        rw.latex(format!(
            "\\begin{{{environment}}}[{}]\n\\centering\n{}\n\\caption{{",
            fig.position,
            graphic(&fig)
        ));
        rw.text(&fig.caption_markdown);
        let mut tail = "}".to_string();
        if let Some(label) = &fig.label {
            tail.push_str(&format!("\n\\label{{{label}}}"));
        }
        tail.push_str(&format!("\n\\end{{{environment}}}"));
        rw.latex(tail);
        figures.push(fig);
    }
    rw.finish();
    figures
}

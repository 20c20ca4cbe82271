use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{line_spans, Rewriter};
use crate::protect::ProtectedText;
use crate::Diagnostics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Left,
    Center,
    Right,
}

impl Alignment {
    fn column(self) -> char {
        match self {
            Alignment::Left => 'l',
            Alignment::Center => 'c',
            Alignment::Right => 'r',
        }
    }

    /// Alignment of one separator cell such as `:--:`.
    pub fn from_separator(cell: &str) -> Option<Alignment> {
        let cell = cell.trim();
        let left = cell.starts_with(':');
        let right = cell.ends_with(':') && cell.len() > 1;
        let dashes = cell.trim_matches(':');
        if dashes.is_empty() || !dashes.bytes().all(|b| b == b'-') {
            return None;
        }
        Some(match (left, right) {
            (true, true) => Alignment::Center,
            (false, true) => Alignment::Right,
            _ => Alignment::Left,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDirective {
    pub header_cells: Vec<String>,
    pub alignment: Vec<Alignment>,
    pub rows: Vec<Vec<String>>,
    pub caption_markdown: Option<String>,
    pub label: Option<String>,
    pub line: usize,
}

static CAPTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Table:\s*(.*?)\s*(?:\{#((?:s?table):[A-Za-z0-9_-]+)\})?\s*$").unwrap());

/// Splits a pipe-table row into trimmed cells. `\|` does not split.
fn split_row(line: &str) -> Vec<&str> {
    let mut row = line.trim();
    row = row.strip_prefix('|').unwrap_or(row);
    if row.ends_with('|') && !row.ends_with("\\|") {
        row = &row[..row.len() - 1];
    }
    let mut cells = Vec::new();
    let mut start = 0;
    let bytes = row.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 1,
            b'|' => {
                cells.push(row[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    cells.push(row[start..].trim());
    cells
}

fn separator(line: &str) -> Option<Vec<Alignment>> {
    if !line.contains('-') {
        return None;
    }
    split_row(line).into_iter().map(Alignment::from_separator).collect()
}

fn is_row(line: &str) -> bool {
    !line.trim().is_empty() && line.contains('|')
}

/// Converts GitHub-style pipe tables, with an optional following
/// `Table: caption {#table:id}` line, into table environments. `stable:`
/// labels select the full-width `table*` form.
pub fn convert_tables(doc: &mut ProtectedText, diags: &mut Diagnostics) -> Vec<TableDirective> {
    let src = doc.text().to_string();
    let lines = line_spans(&src);
    let line = |k: usize| &src[lines[k].0..lines[k].1];
    let mut rw = Rewriter::new(doc);
    let mut tables = Vec::new();
    let mut k = 0;
    while k + 1 < lines.len() {
        let header = line(k);
        let Some(alignment) = is_row(header).then(|| separator(line(k + 1))).flatten() else {
            k += 1;
            continue;
        };
        let header_cells = split_row(header);
        if header_cells.len() != alignment.len() {
            k += 1;
            continue;
        }
        let width = header_cells.len();
        let source_line = rw.line(lines[k].0);
        let mut rows = Vec::new();
        let mut j = k + 2;
        while j < lines.len() && is_row(line(j)) && !CAPTION.is_match(line(j).trim()) {
            let mut cells: Vec<String> = split_row(line(j)).into_iter().map(str::to_string).collect();
            if cells.len() != width {
                diags
                    .error(
                        "RaggedRow",
                        format!("row has {} cells but the header has {width}", cells.len()),
                    )
                    .line = Some(rw.line(lines[j].0));
                cells.resize(width, String::new());
            }
            rows.push(cells);
            j += 1;
        }
        let mut last = j - 1;
        let mut caption = None;
        let mut label = None;
        let caption_at = if j < lines.len() && line(j).trim().is_empty() {
            j + 1
        } else {
            j
        };
        if caption_at < lines.len() {
            if let Some(caps) = CAPTION.captures(line(caption_at).trim()) {
                caption = Some(caps[1].to_string());
                label = caps.get(2).map(|m| m.as_str().to_string());
                last = caption_at;
            }
        }

        let environment = if label.as_deref().is_some_and(|l| l.starts_with("stable:")) {
            "table*"
        } else {
            "table"
        };
        let spec: String = alignment.iter().map(|a| a.column()).collect();
        rw.keep_to(lines[k].0);
        rw.skip_to(lines[last].1);
        rw.latex(format!(
            "\\begin{{{environment}}}[t]\n\\centering\n\\begin{{tabular}}{{{spec}}}\n\\hline\n"
        ));
        let header_owned: Vec<String> = header_cells.iter().map(|c| c.to_string()).collect();
        emit_row(&mut rw, &header_owned);
        rw.latex("\n\\hline\n");
        for row in &rows {
            emit_row(&mut rw, row);
            rw.text("\n");
        }
        let mut tail = String::from("\\hline\n\\end{tabular}");
        if caption.is_some() {
            tail.push_str("\n\\caption{");
        }
        rw.latex(tail);
        if let Some(caption) = &caption {
            rw.text(caption);
            let mut close = String::from("}");
            if let Some(label) = &label {
                close.push_str(&format!("\n\\label{{{label}}}"));
            }
            close.push('\n');
            rw.latex(close);
        } else {
            rw.text("\n");
        }
        rw.latex(format!("\\end{{{environment}}}"));

        tables.push(TableDirective {
            header_cells: header_owned,
            alignment,
            rows,
            caption_markdown: caption,
            label,
            line: source_line,
        });
        k = last + 1;
    }
    rw.finish();
    tables
}

fn emit_row(rw: &mut Rewriter<'_>, cells: &[String]) {
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            rw.latex(" & ");
        }
        rw.text(cell);
    }
    rw.latex(" \\\\");
}

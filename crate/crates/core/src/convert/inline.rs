use super::Rewriter;
use crate::protect::ProtectedText;
use crate::Diagnostics;

fn char_before(s: &str, i: usize) -> Option<char> {
    s[..i].chars().next_back()
}

fn char_at(s: &str, i: usize) -> Option<char> {
    s[i..].chars().next()
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
}

/// A delimiter run that may open emphasis.
fn left_flanking(s: &str, start: usize, end: usize) -> bool {
    let Some(next) = char_at(s, end) else { return false };
    if next.is_whitespace() {
        return false;
    }
    let prev = char_before(s, start);
    !is_punct(next) || prev.is_none_or(|p| p.is_whitespace() || is_punct(p))
}

/// A delimiter run that may close emphasis.
fn right_flanking(s: &str, start: usize, end: usize) -> bool {
    let Some(prev) = char_before(s, start) else {
        return false;
    };
    if prev.is_whitespace() {
        return false;
    }
    let next = char_at(s, end);
    !is_punct(prev) || next.is_none_or(|n| n.is_whitespace() || is_punct(n))
}

fn run_len(bytes: &[u8], i: usize) -> usize {
    bytes[i..].iter().take_while(|&&b| b == b'*').count()
}

/// Whether a blank line starts at the newline at `i`.
fn blank_line_at(bytes: &[u8], i: usize) -> bool {
    bytes[i + 1..]
        .iter()
        .take_while(|&&b| b != b'\n')
        .all(|&b| b == b' ' || b == b'\t')
        && bytes[i + 1..].contains(&b'\n')
}

/// Converts `**x**` to `\textbf{x}` and then `*x*` to `\textit{x}`.
///
/// Emphasis may span single line breaks but not blank lines. When a closing
/// run has more stars than needed, the last ones close, so `***x***` becomes
/// `\textbf{\textit{x}}`.
pub fn convert_emphasis(doc: &mut ProtectedText, diags: &mut Diagnostics) {
    pair_stars(doc, 2, "\\textbf{", diags);
    pair_stars(doc, 1, "\\textit{", diags);
}

fn pair_stars(doc: &mut ProtectedText, width: usize, open: &str, diags: &mut Diagnostics) {
    let mut rw = Rewriter::new(doc);
    let src = rw.src().to_string();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'*' {
            i += 1;
            continue;
        }
        let run = run_len(bytes, i);
        let opens = if width == 2 { run >= 2 } else { run == 1 };
        if !opens || !left_flanking(&src, i, i + run) {
            i += run;
            continue;
        }
        match find_closer(&src, i + width, width) {
            Some(close) => {
                rw.keep_to(i);
                rw.skip_to(i + width);
                rw.latex(open);
                rw.keep_to(close);
                rw.skip_to(close + width);
                rw.latex("}");
                i = close + width;
            }
            None => {
                let line = rw.line(i);
                diags
                    .warning(
                        "UnpairedEmphasis",
                        format!("`{}` is never closed; left as text", "*".repeat(width)),
                    )
                    .line = Some(line);
                i += run;
            }
        }
    }
    rw.finish();
}

/// Start of the `width` stars closing emphasis whose content begins at `from`.
fn find_closer(src: &str, from: usize, width: usize) -> Option<usize> {
    let bytes = src.as_bytes();
    let mut j = from;
    while j < bytes.len() {
        match bytes[j] {
            b'\n' if blank_line_at(bytes, j) => return None,
            b'*' => {
                let run = run_len(bytes, j);
                let fits = if width == 2 { run >= 2 } else { run == 1 };
                let close = j + run - width;
                if fits && close > from && right_flanking(src, j, j + run) {
                    return Some(close);
                }
                j += run;
            }
            _ => j += 1,
        }
    }
    None
}

/// Converts `~x~` to `\textsubscript{x}` and `^x^` to `\textsuperscript{x}`.
///
/// The content must be non-empty and free of whitespace, and the markers may
/// not touch another marker of the same kind (so `~~x~~` is left alone).
pub fn convert_subsuperscript(doc: &mut ProtectedText) {
    mark_pairs(doc, b'~', "\\textsubscript{");
    mark_pairs(doc, b'^', "\\textsuperscript{");
}

fn mark_pairs(doc: &mut ProtectedText, marker: u8, open: &str) {
    let mut rw = Rewriter::new(doc);
    let src = rw.src().to_string();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != marker || (i > 0 && bytes[i - 1] == marker) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < bytes.len() && bytes[j] != marker && !bytes[j].is_ascii_whitespace() {
            j += 1;
        }
        let closed = j < bytes.len() && bytes[j] == marker && j > i + 1 && bytes.get(j + 1) != Some(&marker);
        if closed {
            rw.keep_to(i);
            rw.skip_to(i + 1);
            rw.latex(open);
            rw.keep_to(j);
            rw.skip_to(j + 1);
            rw.latex("}");
            i = j + 1;
        } else {
            i += 1;
        }
    }
    rw.finish();
}

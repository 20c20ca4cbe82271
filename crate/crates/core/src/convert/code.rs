use super::DegreeStyle;
use crate::protect::{ProtectedText, ProtectionKind};

/// Escapes LaTeX-special characters in prose, outside every protected slot.
///
/// `%`, `&`, `#`, `_` and `$` gain a backslash, `^` becomes
/// `\textasciicircum{}`. A backslash already in front of one of these keeps
/// it as is. `~` is left alone. `°` stays unless `degree` asks for the
/// command form.
pub fn escape_prose(doc: &mut ProtectedText, degree: DegreeStyle) {
    doc.map_text(|text| escape_text(text, degree));
}

/// [`escape_prose`] for a plain string with no protected spans.
pub fn escape_plain(text: &str) -> String {
    escape_text(text, DegreeStyle::Unicode)
}

pub(crate) fn escape_text(text: &str, degree: DegreeStyle) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                out.push('\\');
                if let Some(&next) = chars.peek() {
                    if "%&#_$^{}\\~".contains(next) {
                        out.push(next);
                        chars.next();
                    }
                }
            }
            '%' | '&' | '#' | '_' | '$' => {
                out.push('\\');
                out.push(c);
            }
            '^' => out.push_str("\\textasciicircum{}"),
            '°' if degree == DegreeStyle::Command => out.push_str("\\textdegree{}"),
            _ => out.push(c),
        }
    }
    out
}

/// Body of a fenced block: the lines between the fences.
fn fence_body(original: &str) -> &str {
    let Some((_, rest)) = original.split_once('\n') else {
        return "";
    };
    let trimmed = rest.trim_end_matches(['\n', '\r']);
    match trimmed.rfind('\n') {
        Some(i) if is_fence_line(&trimmed[i + 1..]) => &trimmed[..i],
        None if is_fence_line(trimmed) => "",
        _ => trimmed,
    }
}

fn is_fence_line(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3 && (t.bytes().all(|b| b == b'`') || t.bytes().all(|b| b == b'~'))
}

fn inline_code_content(original: &str) -> String {
    let run = original.bytes().take_while(|&b| b == b'`').count();
    let inner = &original[run..original.len() - run];
    let inner = inner.replace('\n', " ");
    let stripped = if inner.len() >= 2 && inner.starts_with(' ') && inner.ends_with(' ') && !inner.trim().is_empty() {
        inner[1..inner.len() - 1].to_string()
    } else {
        inner
    };
    stripped
}

fn verb(content: &str) -> String {
    if content.is_empty() {
        return String::new();
    }
    match "|!+=/@;:".chars().find(|d| !content.contains(*d)) {
        Some(d) => format!("\\verb{d}{content}{d}"),
        None => {
            let escaped: String = content
                .chars()
                .map(|c| match c {
                    '\\' => "\\textbackslash{}".to_string(),
                    '{' | '}' | '%' | '&' | '#' | '_' | '$' => format!("\\{c}"),
                    '^' => "\\textasciicircum{}".to_string(),
                    '~' => "\\textasciitilde{}".to_string(),
                    c => c.to_string(),
                })
                .collect();
            format!("\\texttt{{{escaped}}}")
        }
    }
}

/// Renders code fences as `verbatim` environments and inline code as `\verb`.
pub fn render_code_slots(doc: &mut ProtectedText) {
    let rendered: Vec<(String, String)> = doc
        .slots()
        .iter()
        .filter_map(|slot| {
            let latex = match slot.kind {
                ProtectionKind::CodeFence => {
                    let body = fence_body(&slot.original);
                    if body.is_empty() {
                        "\\begin{verbatim}\n\\end{verbatim}".to_string()
                    } else {
                        format!("\\begin{{verbatim}}\n{body}\n\\end{{verbatim}}")
                    }
                }
                ProtectionKind::InlineCode => verb(&inline_code_content(&slot.original)),
                _ => return None,
            };
            Some((slot.token.clone(), latex))
        })
        .collect();
    for (token, latex) in rendered {
        doc.render_slot(&token, latex);
    }
}

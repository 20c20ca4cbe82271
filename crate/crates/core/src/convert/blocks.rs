use super::{line_spans, Rewriter};
use crate::protect::{ProtectedText, ProtectionKind, TOKEN_OPEN};
use crate::refs::LABEL_ATTR;
use crate::Diagnostics;

/// An ATX header: `(level, title, label)`.
fn parse_header(line: &str) -> Option<(usize, &str, Option<String>)> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let level = rest.bytes().take_while(|&b| b == b'#').count();
    if !(1..=6).contains(&level) {
        return None;
    }
    let after = &rest[level..];
    if !after.is_empty() && !after.starts_with([' ', '\t']) {
        return None;
    }
    let mut title = after.trim();
    let mut label = None;
    if let Some(caps) = LABEL_ATTR.captures(title) {
        let whole = caps.get(0).unwrap();
        if whole.end() == title.len() {
            label = Some(format!("{}:{}", &caps[1], &caps[2]));
            title = title[..whole.start()].trim_end();
        }
    }
    // optional closing sequence
    let stripped = title.trim_end_matches('#');
    if stripped.is_empty() {
        title = "";
    } else if stripped.len() < title.len() && stripped.ends_with([' ', '\t']) {
        title = stripped.trim_end();
    }
    Some((level, title, label))
}

/// Converts `#`, `##` and `###` headers to `\section`, `\subsection` and
/// `\subsubsection`. Deeper levels become `\paragraph` with a warning. A
/// trailing `{#kind:id}` attribute becomes a `\label` after the heading.
pub fn convert_headers(doc: &mut ProtectedText, diags: &mut Diagnostics) {
    let mut rw = Rewriter::new(doc);
    let src = rw.src().to_string();
    for (start, end) in line_spans(&src) {
        let Some((level, title, label)) = parse_header(&src[start..end]) else {
            continue;
        };
        let command = match level {
            1 => "section",
            2 => "subsection",
            3 => "subsubsection",
            _ => {
                let line = rw.line(start);
                diags
                    .warning("DeepHeader", format!("level-{level} header rendered as \\paragraph"))
                    .line = Some(line);
                "paragraph"
            }
        };
        rw.keep_to(start);
        rw.skip_to(end);
        rw.latex(format!("\\{command}{{"));
        rw.text(title);
        rw.latex("}");
        if let Some(label) = label {
            rw.latex(format!("\\label{{{label}}}"));
        }
    }
    rw.finish();
}

/// Turns any remaining `{#kind:id}` attribute into `\label{kind:id}`.
pub fn convert_anchors(doc: &mut ProtectedText) {
    let mut rw = Rewriter::new(doc);
    let src = rw.src().to_string();
    for caps in LABEL_ATTR.captures_iter(&src) {
        let whole = caps.get(0).unwrap();
        rw.keep_to(whole.start());
        rw.skip_to(whole.end());
        rw.latex(format!("\\label{{{}:{}}}", &caps[1], &caps[2]));
    }
    rw.finish();
}

/// Converts `<newpage>` and `<clearpage>`.
pub fn convert_page_controls(doc: &mut ProtectedText) {
    let mut rw = Rewriter::new(doc);
    let src = rw.src().to_string();
    let mut i = 0;
    while let Some(rel) = src[i..].find('<') {
        let at = i + rel;
        let command = ["newpage", "clearpage"]
            .into_iter()
            .find(|c| src[at + 1..].starts_with(c) && src[at + 1 + c.len()..].starts_with('>'));
        match command {
            Some(c) => {
                rw.keep_to(at);
                rw.skip_to(at + c.len() + 2);
                rw.latex(format!("\\{c}"));
                i = at + c.len() + 2;
            }
            None => i = at + 1,
        }
    }
    rw.finish();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ItemStart {
    /// Nesting level: indentation columns / 2, tabs counting 4 columns.
    level: usize,
    ordered: bool,
    /// Whether an ordered marker is `1.`/`1)`.
    first: bool,
    /// Byte offset of the content within the line.
    content: usize,
}

fn parse_item(line: &str) -> Option<ItemStart> {
    let mut cols = 0;
    let mut offset = 0;
    for b in line.bytes() {
        match b {
            b' ' => cols += 1,
            b'\t' => cols += 4,
            _ => break,
        }
        offset += 1;
    }
    let rest = &line[offset..];
    let (marker_len, ordered, first) = match rest.as_bytes().first()? {
        b'-' | b'*' | b'+' => (1, false, false),
        b'0'..=b'9' => {
            let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
            if digits > 9 || !matches!(rest.as_bytes().get(digits), Some(b'.' | b')')) {
                return None;
            }
            (digits + 1, true, rest[..digits].parse::<u64>().ok() == Some(1))
        }
        _ => return None,
    };
    let after = &rest[marker_len..];
    if !after.starts_with([' ', '\t']) {
        return None;
    }
    let content = offset + marker_len + (after.len() - after.trim_start().len());
    Some(ItemStart {
        level: cols / 2,
        ordered,
        first,
        content,
    })
}

/// Whether a non-item line may continue the previous list item. Lines that
/// begin with a block-level slot (fence, display math, emitted LaTeX) end
/// the list instead.
fn continues_item(doc: &ProtectedText, line: &str) -> bool {
    let trimmed = line.trim_start();
    if trimmed.starts_with('|') {
        return false;
    }
    if trimmed.starts_with(TOKEN_OPEN) {
        let token_end = trimmed.find('⟧').map_or(trimmed.len(), |i| i + '⟧'.len_utf8());
        if let Some(slot) = doc.slot(&trimmed[..token_end]) {
            return slot.kind == ProtectionKind::InlineMath || slot.kind == ProtectionKind::InlineCode;
        }
    }
    true
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

/// First line, one past the last line, and the items with their content.
type ListBlock<T> = (usize, usize, Vec<(ItemStart, T)>);

/// Converts `-`/`*`/`+` and `N.`/`N)` list blocks to itemize and enumerate.
///
/// Nesting follows indentation in steps of two columns. Continuation lines
/// are joined into the item, and a single blank line may separate items.
pub fn convert_lists(doc: &mut ProtectedText) {
    let src = doc.text().to_string();
    let lines = line_spans(&src);
    let line = |k: usize| &src[lines[k].0..lines[k].1];

    let mut blocks: Vec<ListBlock<Vec<&str>>> = Vec::new();
    let mut k = 0;
    while k < lines.len() {
        let Some(first) = parse_item(line(k)) else {
            k += 1;
            continue;
        };
        let after_blank = k == 0 || is_blank(line(k - 1));
        if first.ordered && !first.first && !after_blank {
            k += 1;
            continue;
        }
        let mut items = vec![(first, vec![line(k)[first.content..].trim_end()])];
        let mut j = k + 1;
        while j < lines.len() {
            let text = line(j);
            if let Some(item) = parse_item(text) {
                items.push((item, vec![text[item.content..].trim_end()]));
            } else if is_blank(text) {
                if j + 1 < lines.len() && parse_item(line(j + 1)).is_some() {
                    j += 1;
                    continue;
                }
                break;
            } else if continues_item(doc, text) {
                items.last_mut().unwrap().1.push(text.trim());
            } else {
                break;
            }
            j += 1;
        }
        blocks.push((k, j, items));
        k = j;
    }
    if blocks.is_empty() {
        return;
    }

    let owned: Vec<ListBlock<String>> = blocks
        .into_iter()
        .map(|(a, b, items)| {
            let items = items.into_iter().map(|(s, parts)| (s, parts.join(" "))).collect();
            (a, b, items)
        })
        .collect();

    let mut rw = Rewriter::new(doc);
    for (first, last, items) in owned {
        rw.keep_to(lines[first].0);
        rw.skip_to(lines[last - 1].1);
        emit_list(&mut rw, &items);
    }
    rw.finish();
}

fn env(ordered: bool) -> &'static str {
    if ordered {
        "enumerate"
    } else {
        "itemize"
    }
}

fn emit_list(rw: &mut Rewriter<'_>, items: &[(ItemStart, String)]) {
    // open environments as (level, ordered)
    let mut stack: Vec<(usize, bool)> = Vec::new();
    let mut first_line = true;
    let mut newline = |rw: &mut Rewriter<'_>, depth: usize| {
        if !first_line {
            rw.text("\n");
        }
        first_line = false;
        rw.text(&"  ".repeat(depth));
    };
    for (item, content) in items {
        while stack.last().is_some_and(|&(lvl, _)| lvl > item.level) {
            let (_, ordered) = stack.pop().unwrap();
            newline(rw, stack.len());
            rw.latex(format!("\\end{{{}}}", env(ordered)));
        }
        if let Some(&(lvl, ordered)) = stack.last() {
            if lvl == item.level && ordered != item.ordered {
                stack.pop();
                newline(rw, stack.len());
                rw.latex(format!("\\end{{{}}}", env(ordered)));
            }
        }
        if stack.last().is_none_or(|&(lvl, _)| lvl < item.level) {
            newline(rw, stack.len());
            rw.latex(format!("\\begin{{{}}}", env(item.ordered)));
            stack.push((item.level, item.ordered));
        }
        newline(rw, stack.len());
        if content.is_empty() {
            rw.latex("\\item");
        } else {
            rw.latex("\\item ");
            rw.text(content);
        }
    }
    while let Some((_, ordered)) = stack.pop() {
        newline(rw, stack.len());
        rw.latex(format!("\\end{{{}}}", env(ordered)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::testing::run;

    fn headers(input: &str) -> (String, Diagnostics) {
        run(input, convert_headers)
    }

    fn lists(input: &str) -> String {
        run(input, |d, _| convert_lists(d)).0
    }

    #[test]
    fn header_levels() {
        assert_eq!(headers("# Header 1").0, "\\section{Header 1}");
        assert_eq!(headers("## Header 2").0, "\\subsection{Header 2}");
        assert_eq!(headers("### Header 3").0, "\\subsubsection{Header 3}");
        assert_eq!(headers("#no-space").0, "#no-space");
        let (out, diags) = headers("#### Deep");
        assert_eq!(out, "\\paragraph{Deep}");
        assert_eq!(diags.with_code("DeepHeader").count(), 1);
        assert_eq!(headers("# Closed ##").0, "\\section{Closed}");
        assert_eq!(headers("   # Indented").0, "\\section{Indented}");
        assert_eq!(headers("    # Code").0, "    # Code");
    }

    #[test]
    fn header_label() {
        let out = headers("## Notes {#snote:figure-generation}").0;
        assert_eq!(out, "\\subsection{Notes}\\label{snote:figure-generation}");
    }

    #[test]
    fn anchors() {
        let out = run("Text {#snote:x} more", |d, _| convert_anchors(d)).0;
        assert_eq!(out, "Text \\label{snote:x} more");
    }

    #[test]
    fn page_controls() {
        let pc = |s: &str| run(s, |d, _| convert_page_controls(d)).0;
        assert_eq!(pc("<newpage>"), "\\newpage");
        assert_eq!(pc("<clearpage>"), "\\clearpage");
        assert_eq!(pc("<newpages>"), "<newpages>");
        assert_eq!(pc("a <newpage"), "a <newpage");
    }

    #[test]
    fn simple_lists() {
        assert_eq!(
            lists("- a\n- b"),
            "\\begin{itemize}\n  \\item a\n  \\item b\n\\end{itemize}"
        );
        assert_eq!(
            lists("1. a\n2. b"),
            "\\begin{enumerate}\n  \\item a\n  \\item b\n\\end{enumerate}"
        );
    }

    #[test]
    fn nested_and_continued() {
        let input = "intro\n\n- a\n  1. x\n     more x\n  2. y\n\n- b\nafter";
        let expected = "intro\n\n\\begin{itemize}\n  \\item a\n  \\begin{enumerate}\n    \\item x more x\n    \\item y\n  \\end{enumerate}\n  \\item b after\n\\end{itemize}";
        assert_eq!(lists(input), expected);
    }

    #[test]
    fn list_ends_at_paragraph_break() {
        assert_eq!(
            lists("- a\n\nText"),
            "\\begin{itemize}\n  \\item a\n\\end{itemize}\n\nText"
        );
    }

    #[test]
    fn ordered_needs_start_or_break() {
        assert_eq!(lists("In\n2023. was a year"), "In\n2023. was a year");
        assert_eq!(
            lists("In\n1. first"),
            "In\n\\begin{enumerate}\n  \\item first\n\\end{enumerate}"
        );
    }

    #[test]
    fn kind_switch_at_same_level() {
        assert_eq!(
            lists("- a\n1. b"),
            "\\begin{itemize}\n  \\item a\n\\end{itemize}\n\\begin{enumerate}\n  \\item b\n\\end{enumerate}"
        );
    }

    #[test]
    fn emphasis_line_is_not_an_item() {
        assert_eq!(lists("*italic* start"), "*italic* start");
    }
}

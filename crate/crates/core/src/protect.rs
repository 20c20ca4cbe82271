//! Content protection.
//!
//! Before any markdown pass runs, spans that must reach the output verbatim
//! (code, math, raw LaTeX environments, HTML comments) are swapped for opaque
//! placeholder tokens of the form `⟦RXIV:kind:n⟧`. Converter passes only ever
//! see the tokens, and [`ProtectedText::restore`] puts the originals back.
//!
//! ```
//! use rxiv_core::protect::{protect, ProtectionKind};
//! use rxiv_core::Mode;
//!
//! let (doc, _) = protect("$E = mc^2$ in text", Mode::Lenient).unwrap();
//! assert_eq!(doc.slots().len(), 1);
//! assert_eq!(doc.slots()[0].kind, ProtectionKind::InlineMath);
//! assert_eq!(doc.text(), format!("{} in text", doc.slots()[0].token));
//! assert_eq!(doc.restore().unwrap(), "$E = mc^2$ in text");
//! ```

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::{Diagnostics, Mode};

/// Prefix shared by every placeholder token.
pub const TOKEN_OPEN: &str = "⟦RXIV:";
pub const TOKEN_CLOSE: char = '⟧';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtectionKind {
    CodeFence,
    InlineCode,
    DisplayMath,
    InlineMath,
    LatexPassthrough,
    HtmlComment,
}

impl ProtectionKind {
    pub const ALL: [ProtectionKind; 6] = [
        ProtectionKind::CodeFence,
        ProtectionKind::InlineCode,
        ProtectionKind::DisplayMath,
        ProtectionKind::InlineMath,
        ProtectionKind::LatexPassthrough,
        ProtectionKind::HtmlComment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtectionKind::CodeFence => "code_fence",
            ProtectionKind::InlineCode => "inline_code",
            ProtectionKind::DisplayMath => "display_math",
            ProtectionKind::InlineMath => "inline_math",
            ProtectionKind::LatexPassthrough => "latex_passthrough",
            ProtectionKind::HtmlComment => "html_comment",
        }
    }

    pub fn is_math(self) -> bool {
        matches!(self, ProtectionKind::DisplayMath | ProtectionKind::InlineMath)
    }
}

impl fmt::Display for ProtectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtectError {
    #[error("code fence opened at line {line} is never closed")]
    UnterminatedFence { line: usize },
    #[error("unbalanced math delimiter at line {line}")]
    UnbalancedMathDelimiter { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestoreError {
    #[error("placeholder {0} was lost by a conversion pass")]
    MissingPlaceholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub token: String,
    pub original: String,
    pub kind: ProtectionKind,
    /// Whether the slot holds text cut out of the source (as opposed to LaTeX
    /// emitted by a converter pass). Only source slots count towards line numbers.
    pub from_source: bool,
    /// Replacement emitted on restore instead of `original`, set by passes
    /// that render a protected span (numbered equations, code blocks).
    pub rendered: Option<String>,
}

/// A piece of protected text: either literal text or a placeholder token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment<'a> {
    Text(&'a str),
    Token { token: &'a str, slot: usize },
}

/// Document text with placeholders plus the placeholder→original mapping.
#[derive(Debug, Clone, Default)]
pub struct ProtectedText {
    text: String,
    slots: Vec<Slot>,
    lookup: HashMap<String, usize>,
    next_id: usize,
    /// Copy of the original input, kept only when it already contains the
    /// token prefix so fresh tokens can be checked against it.
    guard: Option<String>,
}

impl ProtectedText {
    /// Wraps `text` without protecting anything.
    pub fn plain(text: impl Into<String>) -> Self {
        let text = text.into();
        let guard = text.contains(TOKEN_OPEN).then(|| text.clone());
        ProtectedText {
            text,
            guard,
            next_id: 1,
            ..Default::default()
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn set_text(&mut self, text: String) {
        self.text = text;
    }

    pub fn into_text(self) -> String {
        self.text
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, token: &str) -> Option<&Slot> {
        self.lookup.get(token).map(|&i| &self.slots[i])
    }

    fn fresh_token(&mut self, kind: ProtectionKind) -> String {
        loop {
            let id = self.next_id;
            self.next_id += 1;
            let token = format!("{TOKEN_OPEN}{}:{id}{TOKEN_CLOSE}", kind.name());
            let collides = self.guard.as_deref().is_some_and(|g| g.contains(&token));
            if !collides {
                return token;
            }
        }
    }

    fn register(&mut self, kind: ProtectionKind, original: String, from_source: bool) -> String {
        let token = self.fresh_token(kind);
        self.lookup.insert(token.clone(), self.slots.len());
        self.slots.push(Slot {
            token: token.clone(),
            original,
            kind,
            from_source,
            rendered: None,
        });
        token
    }

    /// Registers LaTeX produced by a converter and returns the token that
    /// stands for it. The caller places the token into the text.
    pub fn emit(&mut self, latex: impl Into<String>) -> String {
        self.register(ProtectionKind::LatexPassthrough, latex.into(), false)
    }

    /// Sets the text that `token` restores to, keeping the original for
    /// line accounting.
    pub fn render_slot(&mut self, token: &str, latex: String) {
        if let Some(&i) = self.lookup.get(token) {
            self.slots[i].rendered = Some(latex);
        }
    }

    /// Splits the text into literal text and known placeholder tokens.
    pub fn segments(&self) -> Vec<Segment<'_>> {
        let mut out = Vec::new();
        let text = self.text.as_str();
        let mut last = 0;
        let mut search = 0;
        while let Some(rel) = text[search..].find(TOKEN_OPEN) {
            let start = search + rel;
            let Some(close_rel) = text[start..].find(TOKEN_CLOSE) else {
                break;
            };
            let end = start + close_rel + TOKEN_CLOSE.len_utf8();
            let candidate = &text[start..end];
            if let Some(&slot) = self.lookup.get(candidate) {
                if start > last {
                    out.push(Segment::Text(&text[last..start]));
                }
                out.push(Segment::Token { token: candidate, slot });
                last = end;
                search = end;
            } else {
                search = start + TOKEN_OPEN.len();
            }
        }
        if last < text.len() {
            out.push(Segment::Text(&text[last..]));
        }
        out
    }

    /// Applies `f` to every stretch of literal text, leaving tokens untouched.
    pub fn map_text(&mut self, mut f: impl FnMut(&str) -> String) {
        let mut out = String::with_capacity(self.text.len());
        for segment in self.segments() {
            match segment {
                Segment::Text(t) => out.push_str(&f(t)),
                Segment::Token { token, .. } => out.push_str(token),
            }
        }
        self.text = out;
    }

    /// 1-based source line of byte offset `pos` in the current text, counting
    /// the newlines hidden inside source slots that precede it.
    pub fn source_line(&self, pos: usize) -> usize {
        let mut line = 1;
        let mut offset = 0;
        for segment in self.segments() {
            match segment {
                Segment::Text(t) => {
                    if offset + t.len() >= pos {
                        return line + t[..pos - offset].matches('\n').count();
                    }
                    line += t.matches('\n').count();
                    offset += t.len();
                }
                Segment::Token { token, slot } => {
                    if offset >= pos {
                        return line;
                    }
                    let slot = &self.slots[slot];
                    if slot.from_source {
                        line += slot.original.matches('\n').count();
                    }
                    offset += token.len();
                }
            }
        }
        line
    }

    /// Replaces every token by its original. HTML comments come back as
    /// LaTeX `%` comments.
    pub fn restore(&self) -> Result<String, RestoreError> {
        let mut used = vec![false; self.slots.len()];
        let mut out = String::with_capacity(self.text.len());
        let segments = self.segments();
        for (i, segment) in segments.iter().enumerate() {
            match *segment {
                Segment::Text(t) => out.push_str(t),
                Segment::Token { slot, .. } => {
                    used[slot] = true;
                    let slot = &self.slots[slot];
                    if let Some(rendered) = &slot.rendered {
                        out.push_str(rendered);
                    } else if slot.kind == ProtectionKind::HtmlComment {
                        let continues = match segments.get(i + 1) {
                            Some(Segment::Text(t)) => !t.starts_with('\n'),
                            Some(Segment::Token { .. }) => true,
                            None => false,
                        };
                        out.push_str(&latex_comment(&slot.original));
                        if continues {
                            out.push('\n');
                        }
                    } else {
                        out.push_str(&slot.original);
                    }
                }
            }
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(RestoreError::MissingPlaceholder(self.slots[missing].token.clone()));
        }
        Ok(out)
    }
}

/// Renders `<!-- body -->` as one `%` comment line per body line.
pub fn latex_comment(html: &str) -> String {
    let body = html
        .strip_prefix("<!--")
        .and_then(|b| b.strip_suffix("-->"))
        .unwrap_or(html)
        .trim();
    if body.is_empty() {
        return "%".to_string();
    }
    body.lines()
        .map(|l| {
            let l = l.trim();
            if l.is_empty() {
                "%".to_string()
            } else {
                format!("% {l}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Classifies a span that starts with `$`.
pub fn classify_math(span: &str) -> Result<ProtectionKind, ProtectError> {
    let err = ProtectError::UnbalancedMathDelimiter { line: 1 };
    if span.len() >= 4 && span.starts_with("$$") && span.ends_with("$$") {
        Ok(ProtectionKind::DisplayMath)
    } else if span.starts_with("$$") {
        Err(err)
    } else if span.len() >= 3 && span.starts_with('$') && span.ends_with('$') {
        Ok(ProtectionKind::InlineMath)
    } else {
        Err(err)
    }
}

/// Protects every verbatim-sensitive span in `input`.
///
/// Code fences are cut out first. The remaining text is scanned left to
/// right and the earliest-starting span wins, so an outer span masks
/// everything inside it; at one position the precedence is html_comment,
/// inline_code, display_math, inline_math, latex_passthrough.
pub fn protect(input: &str, mode: Mode) -> Result<(ProtectedText, Diagnostics), ProtectError> {
    let mut doc = ProtectedText::plain(String::new());
    doc.guard = input.contains(TOKEN_OPEN).then(|| input.to_string());
    let mut diags = Diagnostics::new();
    let fenced = protect_fences(input, &mut doc, mode, &mut diags)?;
    let mut fences: Vec<usize> = doc.slots.iter().filter_map(|slot| fenced.find(&slot.token)).collect();
    fences.sort_unstable();
    let text = InlineScanner {
        src: &fenced,
        fences,
        doc: &mut doc,
        mode,
        diags: &mut diags,
    }
    .run()?;
    doc.text = text;
    Ok((doc, diags))
}

fn fence_opener(line: &str) -> Option<(u8, usize)> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let ch = *rest.as_bytes().first()?;
    if ch != b'`' && ch != b'~' {
        return None;
    }
    let run = rest.bytes().take_while(|&b| b == ch).count();
    if run < 3 {
        return None;
    }
    if ch == b'`' && rest[run..].contains('`') {
        return None;
    }
    Some((ch, run))
}

fn is_fence_closer(line: &str, ch: u8, len: usize) -> bool {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return false;
    }
    let rest = &line[indent..];
    let run = rest.bytes().take_while(|&b| b == ch).count();
    run >= len && rest[run..].trim().is_empty()
}

fn protect_fences(
    input: &str,
    doc: &mut ProtectedText,
    mode: Mode,
    diags: &mut Diagnostics,
) -> Result<String, ProtectError> {
    // (start, end without newline, end with newline)
    let mut lines = Vec::new();
    let mut start = 0;
    for (i, b) in input.bytes().enumerate() {
        if b == b'\n' {
            lines.push((start, i, i + 1));
            start = i + 1;
        }
    }
    if start < input.len() {
        lines.push((start, input.len(), input.len()));
    }

    let mut out = String::with_capacity(input.len());
    let mut i = 0;
    while i < lines.len() {
        let (ls, le, lnl) = lines[i];
        let Some((ch, len)) = fence_opener(&input[ls..le]) else {
            out.push_str(&input[ls..lnl]);
            i += 1;
            continue;
        };
        let closer = (i + 1..lines.len()).find(|&j| {
            let (s, e, _) = lines[j];
            is_fence_closer(&input[s..e], ch, len)
        });
        let (span_end, tail, next) = match closer {
            Some(j) => {
                let (_, e, nl) = lines[j];
                (e, &input[e..nl], j + 1)
            }
            None => {
                if mode.is_strict() {
                    return Err(ProtectError::UnterminatedFence { line: i + 1 });
                }
                diags
                    .warning(
                        "UnterminatedFence",
                        "code fence is never closed; protecting to end of file",
                    )
                    .line = Some(i + 1);
                let end = input.strip_suffix('\n').map_or(input.len(), str::len);
                (end.max(ls), &input[end.max(ls)..], lines.len())
            }
        };
        let token = doc.register(ProtectionKind::CodeFence, input[ls..span_end].to_string(), true);
        out.push_str(&token);
        out.push_str(tail);
        i = next;
    }
    Ok(out)
}

struct InlineScanner<'a> {
    src: &'a str,
    /// Start offsets of fence tokens; no inline span may cross one.
    fences: Vec<usize>,
    doc: &'a mut ProtectedText,
    mode: Mode,
    diags: &'a mut Diagnostics,
}

impl InlineScanner<'_> {
    fn run(mut self) -> Result<String, ProtectError> {
        let full = self.src;
        let mut out = String::with_capacity(full.len());
        let mut last = 0;
        let mut i = 0;
        while i < full.len() {
            let limit = self.fences.iter().copied().find(|&f| f >= i).unwrap_or(full.len());
            let src = &full[..limit];
            let bytes = src.as_bytes();
            if i == limit {
                i += full[i..]
                    .find(TOKEN_CLOSE)
                    .map_or(full.len() - i, |e| e + TOKEN_CLOSE.len_utf8());
                continue;
            }
            let found = match bytes[i] {
                b'<' if src[i..].starts_with("<!--") => match src[i + 4..].find("-->") {
                    Some(rel) => Some((i + 4 + rel + 3, ProtectionKind::HtmlComment)),
                    None => {
                        self.warn(i, "UnterminatedComment", "`<!--` without a closing `-->`");
                        i += 4;
                        continue;
                    }
                },
                b'`' => {
                    let run = count_run(bytes, i, b'`');
                    match find_backtick_run(bytes, i + run, run) {
                        Some(end) => Some((end, ProtectionKind::InlineCode)),
                        None => {
                            i += run;
                            continue;
                        }
                    }
                }
                b'$' if bytes.get(i + 1) == Some(&b'$') => match find_display_close(src, i + 2) {
                    Some(end) => Some((end, ProtectionKind::DisplayMath)),
                    None => {
                        self.unbalanced(i)?;
                        i += 2;
                        continue;
                    }
                },
                b'$' => match find_inline_close(bytes, i) {
                    Some(end) => Some((end, ProtectionKind::InlineMath)),
                    None => {
                        let currency = bytes.get(i + 1).is_some_and(u8::is_ascii_digit);
                        if currency && !self.mode.is_strict() {
                            i += 1;
                            continue;
                        }
                        self.unbalanced(i)?;
                        i += 1;
                        continue;
                    }
                },
                b'\\' => {
                    if src[i..].starts_with("\\begin{") {
                        match match_environment(src, i) {
                            Some(end) => Some((end, ProtectionKind::LatexPassthrough)),
                            None => {
                                self.warn(i, "UnterminatedEnvironment", "\\begin without matching \\end");
                                i += 7;
                                continue;
                            }
                        }
                    } else if at_line_start(src, i) {
                        standalone_command_end(src, i).map(|end| (end, ProtectionKind::LatexPassthrough))
                    } else {
                        None
                    }
                }
                _ => None,
            };
            match found {
                Some((end, kind)) => {
                    out.push_str(&src[last..i]);
                    let token = self.doc.register(kind, src[i..end].to_string(), true);
                    out.push_str(&token);
                    last = end;
                    i = end;
                }
                None if bytes[i] == b'\\' => {
                    let escapes = matches!(bytes.get(i + 1), Some(b'$' | b'`' | b'\\' | b'<'));
                    i += if escapes { 2 } else { 1 };
                }
                None => i += 1,
            }
        }
        out.push_str(&full[last..]);
        Ok(out)
    }

    fn line_at(&self, pos: usize) -> usize {
        let mut probe = ProtectedText {
            text: self.src[..pos].to_string(),
            ..Default::default()
        };
        probe.lookup = self.doc.lookup.clone();
        probe.slots = self.doc.slots.clone();
        probe.source_line(pos)
    }

    fn warn(&mut self, pos: usize, code: &str, message: &str) {
        let line = self.line_at(pos);
        self.diags.warning(code, message).line = Some(line);
    }

    fn unbalanced(&mut self, pos: usize) -> Result<(), ProtectError> {
        let line = self.line_at(pos);
        if self.mode.is_strict() {
            return Err(ProtectError::UnbalancedMathDelimiter { line });
        }
        self.diags
            .warning("UnbalancedMathDelimiter", "`$` does not open a math span; left as text")
            .line = Some(line);
        Ok(())
    }
}

fn count_run(bytes: &[u8], from: usize, ch: u8) -> usize {
    bytes[from..].iter().take_while(|&&b| b == ch).count()
}

/// Finds a backtick run of exactly `len` starting at or after `from`;
/// returns the index just past it.
fn find_backtick_run(bytes: &[u8], from: usize, len: usize) -> Option<usize> {
    let mut j = from;
    while j < bytes.len() {
        if bytes[j] == b'`' {
            let run = count_run(bytes, j, b'`');
            if run == len {
                return Some(j + run);
            }
            j += run;
        } else {
            j += 1;
        }
    }
    None
}

fn find_display_close(src: &str, from: usize) -> Option<usize> {
    let bytes = src.as_bytes();
    let mut j = from;
    while j + 1 < bytes.len() {
        match bytes[j] {
            b'\\' => j += 2,
            b'$' if bytes[j + 1] == b'$' => return Some(j + 2),
            _ => j += 1,
        }
    }
    None
}

/// Inline math closes on the same line at a `$` preceded by non-whitespace
/// and not followed by a digit. The opener must be followed by non-whitespace.
fn find_inline_close(bytes: &[u8], open: usize) -> Option<usize> {
    let first = *bytes.get(open + 1)?;
    if first.is_ascii_whitespace() {
        return None;
    }
    let mut k = open + 1;
    while k < bytes.len() {
        match bytes[k] {
            b'\n' => return None,
            b'\\' => k += 2,
            b'$' if k > open + 1
                && !bytes[k - 1].is_ascii_whitespace()
                && !bytes.get(k + 1).is_some_and(u8::is_ascii_digit) =>
            {
                return Some(k + 1)
            }
            _ => k += 1,
        }
    }
    None
}

fn at_line_start(src: &str, i: usize) -> bool {
    src[..i]
        .bytes()
        .rev()
        .take_while(|&b| b != b'\n')
        .all(|b| b == b' ' || b == b'\t')
}

fn match_environment(src: &str, start: usize) -> Option<usize> {
    let name_start = start + "\\begin{".len();
    let name_len = src[name_start..].find('}')?;
    let name = &src[name_start..name_start + name_len];
    if name.is_empty()
        || !name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'*' || b == b'@')
    {
        return None;
    }
    let open = format!("\\begin{{{name}}}");
    let close = format!("\\end{{{name}}}");
    let mut depth = 1;
    let mut pos = name_start + name_len + 1;
    loop {
        let next_open = src[pos..].find(&open).map(|r| pos + r);
        let next_close = src[pos..].find(&close).map(|r| pos + r)?;
        match next_open {
            Some(o) if o < next_close => {
                depth += 1;
                pos = o + open.len();
            }
            _ => {
                depth -= 1;
                pos = next_close + close.len();
                if depth == 0 {
                    return Some(pos);
                }
            }
        }
    }
}

/// A line made only of LaTeX commands with bracket/brace arguments, such as
/// `\renewcommand{\figurename}{Sup. Fig.}`. Returns the end of the last argument.
fn standalone_command_end(src: &str, start: usize) -> Option<usize> {
    let bytes = src.as_bytes();
    let line_end = src[start..].find('\n').map_or(src.len(), |r| start + r);
    let mut i = start;
    let mut commands = 0;
    while i < line_end && bytes[i] == b'\\' {
        let letters = bytes[i + 1..line_end]
            .iter()
            .take_while(|b| b.is_ascii_alphabetic())
            .count();
        if letters == 0 {
            return None;
        }
        i += 1 + letters;
        if i < line_end && bytes[i] == b'*' {
            i += 1;
        }
        loop {
            match bytes.get(i) {
                Some(b'{') if i < line_end => i = matching_brace(bytes, i, line_end)?,
                Some(b'[') if i < line_end => {
                    i += 1 + src[i + 1..line_end].find(']')? + 1;
                }
                _ => break,
            }
        }
        commands += 1;
    }
    (commands > 0 && src[i..line_end].trim().is_empty()).then_some(i)
}

fn matching_brace(bytes: &[u8], open: usize, limit: usize) -> Option<usize> {
    let mut depth = 0;
    let mut k = open;
    while k < limit {
        match bytes[k] {
            b'\\' => k += 1,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(k + 1);
                }
            }
            _ => {}
        }
        k += 1;
    }
    None
}

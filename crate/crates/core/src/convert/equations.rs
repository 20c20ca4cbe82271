use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::Rewriter;
use crate::protect::{ProtectedText, ProtectionKind};
use crate::Diagnostics;

static LABELED_DISPLAY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(⟦RXIV:display_math:\d+⟧)[ \t]*\{#eq:([A-Za-z0-9_-]+)\}").unwrap());

/// Turns `$$body$$ {#eq:id}` into a numbered `equation` environment.
///
/// The body is kept byte for byte apart from surrounding whitespace.
/// Unlabeled display math is left as `$$...$$`.
pub fn convert_equation_blocks(doc: &mut ProtectedText, diags: &mut Diagnostics) {
    let src = doc.text().to_string();
    let mut seen = HashSet::new();
    let mut rewrites = Vec::new();
    for caps in LABELED_DISPLAY.captures_iter(&src) {
        let token = &caps[1];
        let Some(slot) = doc.slot(token) else { continue };
        if slot.kind != ProtectionKind::DisplayMath {
            continue;
        }
        let label = format!("eq:{}", &caps[2]);
        let whole = caps.get(0).unwrap();
        if !seen.insert(label.clone()) {
            diags
                .error("DuplicateLabel", format!("equation label `{label}` is used twice"))
                .line = Some(doc.source_line(whole.start()));
        }
        let body = slot.original[2..slot.original.len() - 2].trim();
        let latex = format!("\\begin{{equation}}\n{body}\n\\label{{{label}}}\n\\end{{equation}}");
        rewrites.push((whole.start(), whole.end(), token.to_string(), latex));
    }
    if rewrites.is_empty() {
        return;
    }
    for (_, _, token, latex) in &rewrites {
        doc.render_slot(token, latex.clone());
    }
    let mut rw = Rewriter::new(doc);
    for (start, end, token, _) in rewrites {
        rw.keep_to(start);
        rw.skip_to(end);
        rw.text(&token);
    }
    rw.finish();
}

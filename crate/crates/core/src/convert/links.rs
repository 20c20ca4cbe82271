use std::sync::LazyLock;

use regex::Regex;

use super::Rewriter;
use crate::protect::ProtectedText;
use crate::Diagnostics;

static LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[([^\[\]\n]*)\]\(([^()\s]+)\)|<(https?://[^>\s]+)>|https?://[^\s<>⟦]+").unwrap());

/// Converts `[text](url)` to `\href{url}{text}`, and bare or `<...>`-wrapped
/// http(s) URLs to `\url{...}`. One left-to-right scan, so a URL that is a
/// link target is never wrapped again.
pub fn convert_links(doc: &mut ProtectedText, diags: &mut Diagnostics) {
    let mut rw = Rewriter::new(doc);
    let src = rw.src().to_string();
    for caps in LINK.captures_iter(&src) {
        let whole = caps.get(0).unwrap();
        if let (Some(text), Some(url)) = (caps.get(1), caps.get(2)) {
            if src[..whole.start()].ends_with('!') {
                let line = rw.line(whole.start());
                diags
                    .warning("InlineImage", "images must stand on their own line to become figures")
                    .line = Some(line);
                continue;
            }
            rw.keep_to(whole.start());
            rw.skip_to(whole.end());
            rw.latex(format!("\\href{{{}}}{{", url.as_str()));
            rw.text(text.as_str());
            rw.latex("}");
        } else if let Some(url) = caps.get(3) {
            rw.keep_to(whole.start());
            rw.skip_to(whole.end());
            rw.latex(format!("\\url{{{}}}", url.as_str()));
        } else {
            let url = whole
                .as_str()
                .trim_end_matches(['.', ',', ';', ':', '!', '?', ')', '\'', '"']);
            rw.keep_to(whole.start());
            rw.skip_to(whole.start() + url.len());
            rw.latex(format!("\\url{{{url}}}"));
        }
    }
    rw.finish();
}

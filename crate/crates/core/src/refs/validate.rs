use std::collections::HashSet;

use super::{Bibliography, CitationOccurrence, CrossrefOccurrence, LabelIndex};
use crate::{Diagnostics, Mode};

/// Checks every citation key and cross-reference label.
///
/// Reports one `UnknownCitation` per distinct missing key and one
/// `UndefinedReference` per distinct missing label, at their first
/// occurrence, with defect severity for `mode`. Bibliography entries that
/// are never cited produce `UnusedBibEntry` notices.
pub fn validate_references(
    citations: &[CitationOccurrence],
    crossrefs: &[CrossrefOccurrence],
    index: &LabelIndex,
    bib: &Bibliography,
    mode: Mode,
) -> Diagnostics {
    let mut diags = Diagnostics::new();
    let mut reported = HashSet::new();
    for occ in citations {
        if !bib.contains(&occ.key) && reported.insert(occ.key.as_str()) {
            let d = diags.defect(
                mode,
                "UnknownCitation",
                format!("citation key `{}` is not in the bibliography", occ.key),
            );
            d.line = Some(occ.line);
            d.file = occ.file.clone();
        }
    }
    let mut reported = HashSet::new();
    for occ in crossrefs {
        if !index.contains(&occ.label) && reported.insert(occ.label.as_str()) {
            let d = diags.defect(
                mode,
                "UndefinedReference",
                format!("label `{}` is never defined", occ.label),
            );
            d.line = Some(occ.line);
            d.file = occ.file.clone();
        }
    }
    let cited: HashSet<&str> = citations.iter().map(|c| c.key.as_str()).collect();
    for entry in bib.entries() {
        if !cited.contains(entry.key.as_str()) {
            diags.notice(
                "UnusedBibEntry",
                format!("bibliography entry `{}` is never cited", entry.key),
            );
        }
    }
    diags
}

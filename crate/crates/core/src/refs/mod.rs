//! Bibliography parsing, label indexing, citation and cross-reference
//! conversion, and reference validation.

mod bibtex;
mod citations;
mod index;
mod validate;

pub use bibtex::{is_valid_key, parse_bibtex, read_bibtex_file, BibEntry, Bibliography};
pub use citations::{
    convert_citations, convert_crossrefs, scan_references, CitationOccurrence, CrossrefOccurrence, SnoteStyle,
};
pub use index::{build_label_index, LabelIndex, LabelKind, Location};
pub use validate::validate_references;

pub(crate) use index::LABEL_ATTR;

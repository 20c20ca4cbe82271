//! Build engine for rxiv-markdown manuscripts.
//!
//! A manuscript is a directory holding `00_CONFIG.yml`, `01_MAIN.md`, an
//! optional `02_SUPPLEMENTARY.md`, `03_REFERENCES.bib` and a `FIGURES/`
//! directory. The engine turns it into LaTeX through five stages:
//!
//! 1. environment checks ([`pipeline::check_environment`])
//! 2. cached figure generation ([`figgen`])
//! 3. multi-pass markdown conversion ([`protect`], [`convert`], [`refs`])
//! 4. asset aggregation ([`pipeline::aggregate_assets`])
//! 5. LaTeX compilation ([`pipeline::compile_latex`])
//!
//! ```
//! use rxiv_core::convert::{convert_document, ConvertOptions};
//! use rxiv_core::refs::{Bibliography, LabelIndex};
//!
//! let out = convert_document(
//!     "**Water** is H~2~O.",
//!     &LabelIndex::default(),
//!     &Bibliography::default(),
//!     &ConvertOptions::default(),
//! )
//! .unwrap();
//! assert_eq!(out.fragment.content, "\\textbf{Water} is H\\textsubscript{2}O.");
//! ```
//!
//! The guide under `book/` explains each stage in more depth; its code
//! snippets are compiled and run as doc-tests of this crate.

pub mod convert;
pub mod diagnostics;
pub mod exec;
pub mod figgen;
pub mod layout;
pub mod pipeline;
pub mod protect;
pub mod refs;

pub use diagnostics::{Diagnostic, Diagnostics, Severity};

use serde::{Deserialize, Serialize};

/// How manuscript defects are treated.
///
/// In strict mode, warnings that indicate a defect in the manuscript
/// (unknown citation, undefined label, unbalanced math) become errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Lenient,
    Strict,
}

impl Mode {
    pub fn from_strict(strict: bool) -> Mode {
        if strict {
            Mode::Strict
        } else {
            Mode::Lenient
        }
    }

    pub fn is_strict(self) -> bool {
        self == Mode::Strict
    }

    pub fn defect_severity(self) -> Severity {
        match self {
            Mode::Lenient => Severity::Warning,
            Mode::Strict => Severity::Error,
        }
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/layout.md")]
    mod layout {}
    #[doc = include_str!("../../../book/src/protection.md")]
    mod protection {}
    #[doc = include_str!("../../../book/src/conversion.md")]
    mod conversion {}
    #[doc = include_str!("../../../book/src/references.md")]
    mod references {}
    #[doc = include_str!("../../../book/src/figures.md")]
    mod figures {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}

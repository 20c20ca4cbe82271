use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::convert::FigureDirective;
use crate::figgen::FigureKind;
use crate::layout::ManuscriptLayout;
use crate::{Diagnostics, Mode};

/// Variants tried, in order, for a figure that names a generator source.
/// PDF first since the LaTeX engines embed it without conversion.
pub const GENERATED_PREFERENCE: [&str; 4] = ["pdf", "png", "jpg", "jpeg"];

#[derive(Debug, Clone, Default)]
pub struct AggregateOutcome {
    /// Files written into the output tree.
    pub staged: Vec<PathBuf>,
    pub diagnostics: Diagnostics,
}

/// The file a directive's path resolves to, relative to the manuscript root.
/// Generator sources resolve to their first existing rendered variant.
pub fn resolve_figure(root: &Path, path: &Path) -> Option<PathBuf> {
    let generated = FigureKind::from_path(path).is_some_and(FigureKind::is_generator);
    if generated {
        return GENERATED_PREFERENCE
            .iter()
            .map(|ext| path.with_extension(ext))
            .find(|p| root.join(p).is_file());
    }
    root.join(path).is_file().then(|| path.to_path_buf())
}

/// Copies every referenced figure file into the output tree under the same
/// relative path the LaTeX source uses. Unresolvable references yield
/// `MissingFigureFile`, a manuscript defect.
pub fn aggregate_assets(layout: &ManuscriptLayout, directives: &[FigureDirective], mode: Mode) -> AggregateOutcome {
    let mut outcome = AggregateOutcome::default();
    for fig in directives {
        let Some(relative) = resolve_figure(&layout.root_dir, &fig.path) else {
            let label = fig.label.as_deref().unwrap_or("unlabeled");
            outcome
                .diagnostics
                .defect(
                    mode,
                    "MissingFigureFile",
                    format!(
                        "figure {} ({label}) does not resolve to an existing file",
                        fig.path.display()
                    ),
                )
                .line = Some(fig.line);
            continue;
        };
        let target = layout.output_dir.join(&relative);
        if let Err(e) = stage_file(&layout.root_dir.join(&relative), &target) {
            outcome
                .diagnostics
                .error("StagingFailed", format!("cannot copy {}: {e}", relative.display()));
            continue;
        }
        if !outcome.staged.contains(&target) {
            outcome.staged.push(target);
        }
    }
    outcome
}

/// Copies `from` to `to` unless `to` already holds identical bytes.
pub fn stage_file(from: &Path, to: &Path) -> io::Result<()> {
    if let Some(parent) = to.parent() {
        fs::create_dir_all(parent)?;
    }
    if fs::read(to).ok() == Some(fs::read(from)?) {
        return Ok(());
    }
    fs::copy(from, to).map(drop)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(root: &Path) -> ManuscriptLayout {
        ManuscriptLayout {
            root_dir: root.to_path_buf(),
            main_md: root.join("01_MAIN.md"),
            supplementary_md: None,
            config_yaml: root.join("00_CONFIG.yml"),
            bibliography_bib: root.join("03_REFERENCES.bib"),
            figures_dir: root.join("FIGURES"),
            output_dir: root.join("output"),
        }
    }

    fn directive(path: &str, label: &str) -> FigureDirective {
        FigureDirective {
            caption_markdown: String::new(),
            path: path.into(),
            label: Some(label.into()),
            width: 1.0,
            position: "t".into(),
            span_two_columns: false,
            line: 1,
        }
    }

    #[test]
    fn generated_variant_prefers_pdf() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        fs::create_dir(root.join("FIGURES")).unwrap();
        for f in ["a.mmd", "a.svg", "a.png", "a.pdf"] {
            fs::write(root.join("FIGURES").join(f), f).unwrap();
        }
        let out = aggregate_assets(&layout(root), &[directive("FIGURES/a.mmd", "fig:a")], Mode::Strict);
        assert!(out.diagnostics.is_empty());
        assert_eq!(out.staged, vec![root.join("output/FIGURES/a.pdf")]);
        assert_eq!(fs::read_to_string(root.join("output/FIGURES/a.pdf")).unwrap(), "a.pdf");
    }

    #[test]
    fn missing_file_names_path_and_label() {
        let tmp = tempfile::tempdir().unwrap();
        let out = aggregate_assets(
            &layout(tmp.path()),
            &[directive("FIGURES/x.png", "fig:x")],
            Mode::Strict,
        );
        let d: Vec<_> = out.diagnostics.with_code("MissingFigureFile").collect();
        assert_eq!(d.len(), 1);
        assert!(d[0].is_error());
        assert!(d[0].message.contains("FIGURES/x.png") && d[0].message.contains("fig:x"));
    }

    #[test]
    fn no_directives() {
        let tmp = tempfile::tempdir().unwrap();
        let out = aggregate_assets(&layout(tmp.path()), &[], Mode::Strict);
        assert!(out.staged.is_empty() && out.diagnostics.is_empty());
        assert!(!tmp.path().join("output").exists());
    }
}

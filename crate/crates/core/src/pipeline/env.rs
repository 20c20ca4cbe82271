use super::{BuildPlan, Stage};
use crate::exec::locate;
use crate::figgen::{FigureAsset, FigureKind};
use crate::layout::ManuscriptConfig;
use crate::{Diagnostics, Severity};

/// What the manuscript will ask of external tools.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ToolNeeds {
    pub mermaid: bool,
    pub python: bool,
    pub r: bool,
    /// Any citation exists, so the bibliography processor runs.
    pub bibliography: bool,
}

impl ToolNeeds {
    pub fn from_assets(assets: &[FigureAsset], has_citations: bool) -> ToolNeeds {
        let has = |kind| assets.iter().any(|a| a.kind == kind);
        ToolNeeds {
            mermaid: has(FigureKind::Mermaid),
            python: has(FigureKind::PyScript),
            r: has(FigureKind::RScript),
            bibliography: has_citations,
        }
    }
}

/// Probes the LaTeX engine, bibliography processor and figure generators.
///
/// A missing tool is an error when a planned stage will call it, a notice
/// when its stage is planned but has nothing for it to do, and a warning
/// when its stage is skipped.
pub fn check_environment(config: &ManuscriptConfig, engine: &str, plan: &BuildPlan, needs: ToolNeeds) -> Diagnostics {
    let mut diags = Diagnostics::new();
    let g = &config.generators;
    let latex = plan.runs(Stage::LatexCompilation);
    let figures = plan.runs(Stage::ContentGeneration);
    let probes = [
        ("LaTeX engine", engine, latex, true),
        (
            "bibliography processor",
            config.bibliography_processor.as_str(),
            latex,
            needs.bibliography,
        ),
        ("mermaid CLI", first(&g.mermaid), figures, needs.mermaid),
        ("python interpreter", first(&g.python), figures, needs.python),
        ("R interpreter", first(&g.r), figures, needs.r),
    ];
    for (role, command, stage_planned, used) in probes {
        if locate(command).is_some() {
            continue;
        }
        let severity = match (stage_planned, used) {
            (true, true) => Severity::Error,
            (true, false) => Severity::Notice,
            (false, _) => Severity::Warning,
        };
        diags.add(severity, "ToolMissing", format!("{role} `{command}` not found"));
    }
    diags
}

fn first(argv: &[String]) -> &str {
    argv.first().map(String::as_str).unwrap_or("")
}

//! The five-stage build.
//!
//! [`build`] runs environment checks, figure generation, markdown
//! conversion, asset aggregation and LaTeX compilation in that order and
//! writes everything under the output directory:
//!
//! ```text
//! output/
//!   01_MAIN.tex  02_SUPPLEMENTARY.tex  03_REFERENCES.bib  01_MAIN.pdf
//!   FIGURES/      staged figures and the cache manifest
//!   logs/         one log per LaTeX tool invocation
//!   build_report.json
//! ```
//!
//! The first failing stage stops the build; later stages are reported as
//! skipped and the report is still written.

mod aggregate;
mod env;
mod latex;
mod plan;
mod report;
mod template;

pub use aggregate::{aggregate_assets, resolve_figure, stage_file, AggregateOutcome, GENERATED_PREFERENCE};
pub use env::{check_environment, ToolNeeds};
pub use latex::{compile_latex, parse_log, LatexOutcome, LatexRequest, LogFindings, MAX_EXTRA_PASSES};
pub use plan::{BuildPlan, PlanError, Stage};
pub use report::{exit, BuildReport, FailureClass, StageReport, StageStatus, REPORT_FILE};
pub use template::{render_main_tex, MainDocument, BASE_PACKAGES};

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::convert::{convert_document, ConvertOptions, FigureDirective, LatexFragment};
use crate::figgen::{generate_all, scan_figures, CacheManifest, FigureAsset, GenerateOptions, GenerateOutcome};
use crate::layout::{discover_layout, parse_config, ConfigError, LayoutError, ManuscriptConfig, ManuscriptLayout};
use crate::refs::{build_label_index, read_bibtex_file, scan_references, validate_references};
use crate::{Diagnostics, Mode};

/// Environment variable that overrides the configured LaTeX engine.
pub const ENGINE_ENV: &str = "RXIV_ENGINE";
pub const MAIN_TEX: &str = "01_MAIN.tex";
pub const SUPPLEMENTARY_TEX: &str = "02_SUPPLEMENTARY.tex";
pub const LATEX_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Usage(#[from] PlanError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("{}: {source}", path.display())]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl BuildError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BuildError::Usage(_) => exit::USAGE,
            BuildError::Layout(_) | BuildError::Config { .. } => exit::VALIDATION,
            BuildError::Io { .. } => exit::TOOL,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> BuildError + '_ {
    move |source| BuildError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A discovered manuscript with its config and markdown sources loaded.
#[derive(Debug, Clone)]
pub struct Manuscript {
    pub layout: ManuscriptLayout,
    pub config: ManuscriptConfig,
    pub mode: Mode,
    pub main_text: String,
    pub supplementary_text: Option<String>,
}

impl Manuscript {
    /// Loads the manuscript at `root`. Strict mode applies when `strict` is
    /// set or the config asks for it.
    pub fn open(root: &Path, output_dir: Option<&Path>, strict: bool) -> Result<Manuscript, BuildError> {
        let mut layout = discover_layout(root)?;
        if let Some(out) = output_dir {
            layout = layout.with_output_dir(out)?;
        }
        let config = parse_config(&layout.config_yaml).map_err(|source| BuildError::Config {
            path: layout.config_yaml.clone(),
            source,
        })?;
        let layout = layout.with_bibliography(&config.bibliography);
        let main_text = fs::read_to_string(&layout.main_md).map_err(io_error(&layout.main_md))?;
        let supplementary_text = match &layout.supplementary_md {
            Some(path) => Some(fs::read_to_string(path).map_err(io_error(path))?),
            None => None,
        };
        Ok(Manuscript {
            mode: Mode::from_strict(strict || config.strict),
            layout,
            config,
            main_text,
            supplementary_text,
        })
    }

    /// `(path relative to the root, text)` for every markdown source.
    pub fn documents(&self) -> Vec<(PathBuf, &str)> {
        let mut docs = vec![(
            self.layout.relative(&self.layout.main_md).to_path_buf(),
            self.main_text.as_str(),
        )];
        if let (Some(path), Some(text)) = (&self.layout.supplementary_md, &self.supplementary_text) {
            docs.push((self.layout.relative(path).to_path_buf(), text.as_str()));
        }
        docs
    }

    pub fn has_citations(&self) -> bool {
        self.documents()
            .iter()
            .any(|(_, text)| !scan_references(text).0.is_empty())
    }

    fn bibliography_stem(&self) -> String {
        self.layout
            .bibliography_bib
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "references".into())
    }
}

/// The converted manuscript.
#[derive(Debug, Clone, Default)]
pub struct Rendered {
    /// The complete main `.tex`; `None` when conversion failed.
    pub main_tex: Option<String>,
    pub supplementary_tex: Option<String>,
    pub figures: Vec<FigureDirective>,
    pub has_citations: bool,
    pub diagnostics: Diagnostics,
}

impl Rendered {
    pub fn failed(&self) -> bool {
        self.main_tex.is_none()
    }
}

/// Builds the label index and bibliography, converts every document, and
/// validates references once across all of them.
pub fn render_manuscript(m: &Manuscript) -> Rendered {
    let mode = m.mode;
    let mut rendered = Rendered::default();
    let docs = m.documents();

    let (index, index_diags) = build_label_index(&docs);
    rendered.diagnostics.extend(index_diags);
    let bib = match read_bibtex_file(&m.layout.bibliography_bib, mode) {
        Ok((bib, diags)) => {
            rendered.diagnostics.extend(diags);
            bib
        }
        Err(e) => {
            rendered.diagnostics.error(
                "BibliographyUnreadable",
                format!("{}: {e}", m.layout.bibliography_bib.display()),
            );
            return rendered;
        }
    };

    let options = ConvertOptions {
        mode,
        validate_references: false,
        ..ConvertOptions::default()
    };
    let mut fragments: Vec<LatexFragment> = Vec::new();
    let mut citations = Vec::new();
    let mut crossrefs = Vec::new();
    let mut failed = false;
    for (path, text) in &docs {
        match convert_document(text, &index, &bib, &options) {
            Ok(mut out) => {
                out.diagnostics.stamp_file(path);
                rendered.diagnostics.extend(out.diagnostics);
                rendered.figures.extend(out.figures);
                citations.extend(out.citations.into_iter().map(|mut c| {
                    c.file = Some(path.clone());
                    c
                }));
                crossrefs.extend(out.crossrefs.into_iter().map(|mut c| {
                    c.file = Some(path.clone());
                    c
                }));
                fragments.push(out.fragment);
            }
            Err(mut failure) => {
                failure.diagnostics.stamp_file(path);
                rendered.diagnostics.extend(failure.diagnostics);
                failed = true;
            }
        }
    }
    rendered
        .diagnostics
        .extend(validate_references(&citations, &crossrefs, &index, &bib, mode));
    rendered.has_citations = !citations.is_empty();
    if failed || (mode.is_strict() && rendered.diagnostics.has_errors()) {
        return rendered;
    }

    let stem = m.bibliography_stem();
    let supplementary_input = SUPPLEMENTARY_TEX.trim_end_matches(".tex");
    let main = render_main_tex(&MainDocument {
        config: &m.config,
        body: &fragments[0],
        supplementary: fragments.get(1),
        bibliography: rendered.has_citations.then_some(stem.as_str()),
        supplementary_input,
    });
    rendered.main_tex = Some(main);
    rendered.supplementary_tex = fragments.get(1).map(|f| {
        let mut text = f.content.trim_end().to_string();
        text.push('\n');
        text
    });
    rendered
}

/// Runs figure generation and persists the manifest.
pub fn generate_figures(m: &Manuscript, assets: &[FigureAsset], force: bool, jobs: Option<usize>) -> GenerateOutcome {
    let manifest_path = m.layout.manifest_path();
    let mut pre = Diagnostics::new();
    let manifest = CacheManifest::load(&manifest_path).unwrap_or_else(|e| {
        pre.warning("ManifestReset", format!("{e}; starting with an empty cache"));
        CacheManifest::default()
    });
    let defaults = GenerateOptions::default();
    let options = GenerateOptions {
        force,
        parallelism: jobs.unwrap_or(defaults.parallelism).max(1),
        mode: m.mode,
        commands: m.config.generators.clone(),
    };
    let mut outcome = generate_all(assets, &manifest, &options);
    if let Err(e) = outcome.manifest.save(&manifest_path) {
        outcome.diagnostics.error("ManifestWriteFailed", e.to_string());
    }
    pre.extend(outcome.diagnostics);
    outcome.diagnostics = pre;
    outcome
}

/// Lists figure sources, noting an absent figures directory.
pub fn scan_assets(m: &Manuscript) -> (Vec<FigureAsset>, Diagnostics) {
    let mut diags = Diagnostics::new();
    let dir = &m.layout.figures_dir;
    if !dir.is_dir() {
        diags.notice(
            "NoFiguresDirectory",
            format!("{} does not exist", m.layout.relative(dir).display()),
        );
        return (Vec::new(), diags);
    }
    match scan_figures(dir) {
        Ok(assets) => (assets, diags),
        Err(e) => {
            diags.error("FigureScanFailed", format!("{}: {e}", dir.display()));
            (Vec::new(), diags)
        }
    }
}

/// Engine choice: explicit flag, then the environment variable, then config.
pub fn resolve_engine(flag: Option<&str>, env: Option<&str>, config: &ManuscriptConfig) -> String {
    flag.or(env)
        .filter(|e| !e.trim().is_empty())
        .map_or_else(|| config.latex_engine.clone(), str::to_string)
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub manuscript_dir: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub strict: bool,
    pub force_figures: bool,
    pub skip: Vec<Stage>,
    /// `--engine` value.
    pub engine: Option<String>,
    /// Value of [`ENGINE_ENV`], passed in by the caller.
    pub engine_env: Option<String>,
    pub jobs: Option<usize>,
}

struct StageRunner {
    reports: Vec<StageReport>,
    blocked: bool,
}

impl StageRunner {
    fn run(&mut self, stage: Stage, planned: bool, body: impl FnOnce() -> (Diagnostics, Option<FailureClass>)) {
        if !planned || self.blocked {
            self.reports.push(StageReport {
                stage,
                status: StageStatus::Skipped,
                failure: None,
                duration_seconds: 0.0,
                diagnostics: Diagnostics::new(),
            });
            return;
        }
        let start = Instant::now();
        let (mut diagnostics, failure) = body();
        diagnostics.sort();
        self.blocked = failure.is_some();
        self.reports.push(StageReport {
            stage,
            status: if failure.is_some() {
                StageStatus::Failed
            } else {
                StageStatus::Ok
            },
            failure,
            duration_seconds: start.elapsed().as_secs_f64(),
            diagnostics,
        });
    }
}

fn strict_failure(mode: Mode, diags: &Diagnostics, class: FailureClass) -> Option<FailureClass> {
    (mode.is_strict() && diags.has_errors()).then_some(class)
}

/// Runs the full pipeline and writes `build_report.json`.
pub fn build(options: &BuildOptions) -> Result<BuildReport, BuildError> {
    BuildPlan::new(options.skip.iter().copied(), options.strict)?;
    let m = Manuscript::open(&options.manuscript_dir, options.output_dir.as_deref(), options.strict)?;
    let mode = m.mode;
    let plan = BuildPlan::new(options.skip.iter().copied(), mode.is_strict())?;
    let engine = resolve_engine(options.engine.as_deref(), options.engine_env.as_deref(), &m.config);
    let out_dir = m.layout.output_dir.clone();
    fs::create_dir_all(&out_dir).map_err(io_error(&out_dir))?;

    let (assets, scan_diags) = scan_assets(&m);
    let has_citations = m.has_citations();
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let mut runner = StageRunner {
        reports: Vec::new(),
        blocked: false,
    };

    runner.run(Stage::EnvSetup, plan.runs(Stage::EnvSetup), || {
        let mut d = m.config.unknown_key_diagnostics(mode);
        d.extend(check_environment(
            &m.config,
            &engine,
            &plan,
            ToolNeeds::from_assets(&assets, has_citations),
        ));
        let failure = d
            .with_code("ToolMissing")
            .any(|x| x.is_error())
            .then_some(FailureClass::Tool)
            .or(strict_failure(mode, &d, FailureClass::Validation));
        (d, failure)
    });

    runner.run(Stage::ContentGeneration, plan.runs(Stage::ContentGeneration), || {
        let outcome = generate_figures(&m, &assets, options.force_figures, options.jobs);
        artifacts.push(m.layout.manifest_path());
        let mut d = scan_diags.clone();
        d.extend(outcome.diagnostics);
        let failure = strict_failure(mode, &d, FailureClass::Tool);
        (d, failure)
    });

    let mut rendered = Rendered::default();
    runner.run(Stage::MarkdownProcessing, true, || {
        rendered = render_manuscript(&m);
        let mut d = rendered.diagnostics.clone();
        let Some(main) = &rendered.main_tex else {
            return (d, Some(FailureClass::Validation));
        };
        let mut writes = vec![(out_dir.join(MAIN_TEX), main.as_str())];
        if let Some(supp) = &rendered.supplementary_tex {
            writes.push((out_dir.join(SUPPLEMENTARY_TEX), supp.as_str()));
        }
        for (path, text) in writes {
            if let Err(e) = fs::write(&path, text) {
                d.error("WriteFailed", format!("{}: {e}", path.display()));
                return (d, Some(FailureClass::Tool));
            }
            artifacts.push(path);
        }
        (d, None)
    });

    runner.run(Stage::AssetAggregation, plan.runs(Stage::AssetAggregation), || {
        let mut outcome = aggregate_assets(&m.layout, &rendered.figures, mode);
        artifacts.extend(outcome.staged);
        if rendered.has_citations {
            let bib = &m.layout.bibliography_bib;
            let target = out_dir.join(bib.file_name().unwrap_or_default());
            match stage_file(bib, &target) {
                Ok(()) => artifacts.push(target),
                Err(e) => {
                    outcome
                        .diagnostics
                        .error("StagingFailed", format!("{}: {e}", bib.display()));
                }
            }
        }
        let d = outcome.diagnostics;
        let failure = d
            .with_code("StagingFailed")
            .next()
            .map(|_| FailureClass::Tool)
            .or(strict_failure(mode, &d, FailureClass::Validation));
        (d, failure)
    });

    runner.run(Stage::LatexCompilation, plan.runs(Stage::LatexCompilation), || {
        let outcome = compile_latex(&LatexRequest {
            main_tex: out_dir.join(MAIN_TEX),
            engine: engine.clone(),
            bibliography_processor: m.config.bibliography_processor.clone(),
            run_bibliography: rendered.has_citations,
            logs_dir: m.layout.logs_dir(),
            mode,
            timeout: LATEX_TIMEOUT,
        });
        artifacts.extend(outcome.logs.iter().cloned());
        artifacts.extend(outcome.pdf.iter().cloned());
        (outcome.diagnostics, outcome.failure)
    });

    let report = BuildReport::new(runner.reports, artifacts, mode.is_strict());
    report.write(&out_dir).map_err(io_error(&out_dir))?;
    Ok(report)
}

/// Reference and environment checks without writing anything. Always strict.
pub fn validate(root: &Path) -> Result<Diagnostics, BuildError> {
    let m = Manuscript::open(root, None, true)?;
    let (assets, mut diags) = scan_assets(&m);
    let plan = BuildPlan::new([Stage::LatexCompilation], true)?;
    diags.extend(m.config.unknown_key_diagnostics(m.mode));
    diags.extend(check_environment(
        &m.config,
        &m.config.latex_engine,
        &plan,
        ToolNeeds::from_assets(&assets, m.has_citations()),
    ));
    diags.extend(render_manuscript(&m).diagnostics);
    diags.sort();
    Ok(diags)
}

/// Removes the output tree, including the figure cache manifest. Returns
/// whether anything was removed.
pub fn clean(layout: &ManuscriptLayout) -> io::Result<bool> {
    match fs::remove_dir_all(&layout.output_dir) {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_precedence() {
        let config = ManuscriptConfig::with_title("t");
        assert_eq!(resolve_engine(Some("lualatex"), Some("xelatex"), &config), "lualatex");
        assert_eq!(resolve_engine(None, Some("xelatex"), &config), "xelatex");
        assert_eq!(resolve_engine(None, None, &config), "pdflatex");
        assert_eq!(resolve_engine(None, Some(""), &config), "pdflatex");
    }

    #[test]
    fn skipped_after_failure() {
        let mut runner = StageRunner {
            reports: Vec::new(),
            blocked: false,
        };
        runner.run(Stage::EnvSetup, true, || (Diagnostics::new(), Some(FailureClass::Tool)));
        runner.run(Stage::ContentGeneration, true, || unreachable!());
        let statuses: Vec<_> = runner.reports.iter().map(|r| r.status).collect();
        assert_eq!(statuses, [StageStatus::Failed, StageStatus::Skipped]);
    }
}

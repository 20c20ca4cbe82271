//! Command-line interface for the manuscript build engine.
//!
//! [`cli`] parses arguments, runs one subcommand and returns the process
//! exit code: 0 success, 1 manuscript errors, 2 tool or environment
//! failure, 64 usage error.

use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rxiv_core::pipeline::{self, exit, BuildOptions, Manuscript, Stage, StageStatus};
use rxiv_core::{Diagnostic, Diagnostics, Severity};

#[derive(Debug, Parser)]
#[command(name = "rxiv", version, about = "Build LaTeX and PDF from a markdown manuscript")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Manuscript directory holding 00_CONFIG.yml and 01_MAIN.md.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    manuscript_dir: PathBuf,
    /// Output directory; defaults to <manuscript-dir>/output.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Treat manuscript defects as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Regenerate every figure regardless of the cache.
    #[arg(long, global = true)]
    force_figures: bool,
    /// Skip a stage; repeatable.
    #[arg(long, global = true, value_name = "STAGE", value_parser = parse_stage)]
    skip: Vec<Stage>,
    /// LaTeX engine command; overrides RXIV_ENGINE and the config.
    #[arg(long, global = true, value_name = "COMMAND")]
    engine: Option<String>,
    /// Concurrent figure generators.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// Print errors only.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Print notices as well.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline.
    Build,
    /// Convert the manuscript to LaTeX only.
    Convert {
        /// Write the main .tex here instead of standard output.
        #[arg(long, short, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Generate figures only.
    Figures,
    /// Check references, labels and tools without writing output.
    Validate,
    /// Remove the output tree and figure cache.
    Clean,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse::<Stage>().map_err(|e| e.to_string())
}

struct Console<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    quiet: bool,
    verbose: bool,
}

impl Console<'_> {
    fn shows(&self, d: &Diagnostic) -> bool {
        match d.severity {
            Severity::Error => true,
            Severity::Warning => !self.quiet,
            Severity::Notice => self.verbose,
        }
    }

    fn diagnostics<'d>(&mut self, diags: impl IntoIterator<Item = &'d Diagnostic>) {
        for d in diags {
            if self.shows(d) {
                let _ = writeln!(self.err, "{d}");
            }
        }
    }

    fn info(&mut self, line: impl std::fmt::Display) {
        if !self.quiet {
            let _ = writeln!(self.out, "{line}");
        }
    }

    fn fail(&mut self, line: impl std::fmt::Display, code: i32) -> i32 {
        let _ = writeln!(self.err, "error: {line}");
        code
    }
}

/// Runs the CLI with the real environment and standard streams.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let engine_env = std::env::var(pipeline::ENGINE_ENV).ok();
    run(argv, engine_env, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs the CLI against explicit streams; `engine_env` stands in for
/// `RXIV_ENGINE`.
pub fn run<I, T>(argv: I, engine_env: Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            if informational {
                let _ = write!(out, "{text}");
                return exit::SUCCESS;
            }
            let _ = write!(err, "{text}");
            return exit::USAGE;
        }
    };
    let g = &parsed.global;
    let mut console = Console {
        out,
        err,
        quiet: g.quiet,
        verbose: g.verbose,
    };
    match parsed.command {
        Command::Build => build(g, engine_env, &mut console),
        Command::Convert { out } => convert(g, out, &mut console),
        Command::Figures => figures(g, &mut console),
        Command::Validate => validate(g, &mut console),
        Command::Clean => clean(g, &mut console),
    }
}

fn open(g: &Global, strict: bool) -> Result<Manuscript, pipeline::BuildError> {
    Manuscript::open(&g.manuscript_dir, g.output_dir.as_deref(), strict)
}

fn build(g: &Global, engine_env: Option<String>, console: &mut Console<'_>) -> i32 {
    let options = BuildOptions {
        manuscript_dir: g.manuscript_dir.clone(),
        output_dir: g.output_dir.clone(),
        strict: g.strict,
        force_figures: g.force_figures,
        skip: g.skip.clone(),
        engine: g.engine.clone(),
        engine_env,
        jobs: g.jobs.map(usize::from),
    };
    let report = match pipeline::build(&options) {
        Ok(report) => report,
        Err(e) => return console.fail(&e, e.exit_code()),
    };
    for stage in &report.stages {
        console.diagnostics(stage.diagnostics.iter());
    }
    for stage in &report.stages {
        let status = match stage.status {
            StageStatus::Ok => "ok",
            StageStatus::Skipped => "skipped",
            StageStatus::Failed => "FAILED",
        };
        console.info(format_args!(
            "{:<20} {status:<8} {:.2} s",
            stage.stage.name(),
            stage.duration_seconds
        ));
    }
    if let Some(pdf) = report
        .artifacts
        .iter()
        .find(|p| p.extension().is_some_and(|e| e == "pdf"))
    {
        console.info(format_args!("wrote {}", pdf.display()));
    }
    report.exit_code
}

fn convert(g: &Global, target: Option<PathBuf>, console: &mut Console<'_>) -> i32 {
    let m = match open(g, g.strict) {
        Ok(m) => m,
        Err(e) => return console.fail(&e, e.exit_code()),
    };
    let rendered = pipeline::render_manuscript(&m);
    console.diagnostics(rendered.diagnostics.iter());
    let Some(tex) = rendered.main_tex else {
        return exit::VALIDATION;
    };
    match target {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, &tex) {
                return console.fail(format_args!("{}: {e}", path.display()), exit::TOOL);
            }
            if let Some(supp) = &rendered.supplementary_tex {
                let supp_path = path.with_file_name(pipeline::SUPPLEMENTARY_TEX);
                if let Err(e) = std::fs::write(&supp_path, supp) {
                    return console.fail(format_args!("{}: {e}", supp_path.display()), exit::TOOL);
                }
            }
        }
        None => {
            let _ = console.out.write_all(tex.as_bytes());
        }
    }
    exit::SUCCESS
}

fn figures(g: &Global, console: &mut Console<'_>) -> i32 {
    let m = match open(g, g.strict) {
        Ok(m) => m,
        Err(e) => return console.fail(&e, e.exit_code()),
    };
    let (assets, mut diags) = pipeline::scan_assets(&m);
    let outcome = pipeline::generate_figures(&m, &assets, g.force_figures, g.jobs.map(usize::from));
    diags.extend(outcome.diagnostics);
    console.diagnostics(diags.iter().filter(|d| d.code != "FigureSummary"));
    let _ = writeln!(console.out, "{}", outcome.summary);
    if outcome.summary.failed > 0 || diags.has_errors() {
        exit::TOOL
    } else {
        exit::SUCCESS
    }
}

fn validate(g: &Global, console: &mut Console<'_>) -> i32 {
    let diags: Diagnostics = match pipeline::validate(&g.manuscript_dir) {
        Ok(d) => d,
        Err(e) => return console.fail(&e, e.exit_code()),
    };
    console.diagnostics(diags.iter());
    if diags.has_errors() {
        exit::VALIDATION
    } else {
        console.info("manuscript is valid");
        exit::SUCCESS
    }
}

fn clean(g: &Global, console: &mut Console<'_>) -> i32 {
    let m = match open(g, false) {
        Ok(m) => m,
        Err(e) => return console.fail(&e, e.exit_code()),
    };
    match pipeline::clean(&m.layout) {
        Ok(true) => {
            console.info(format_args!("removed {}", m.layout.output_dir.display()));
            exit::SUCCESS
        }
        Ok(false) => exit::SUCCESS,
        Err(e) => console.fail(format_args!("{}: {e}", m.layout.output_dir.display()), exit::TOOL),
    }
}

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;

use super::FailureClass;
use crate::exec::{excerpt, locate, ExecError, Invocation};
use crate::{Diagnostics, Mode};

/// Extra engine passes allowed when the log still asks for a rerun.
pub const MAX_EXTRA_PASSES: usize = 2;

#[derive(Debug, Clone)]
pub struct LatexRequest {
    pub main_tex: PathBuf,
    pub engine: String,
    pub bibliography_processor: String,
    /// Whether any citation exists; without one the processor pass is skipped.
    pub run_bibliography: bool,
    pub logs_dir: PathBuf,
    pub mode: Mode,
    pub timeout: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct LatexOutcome {
    pub diagnostics: Diagnostics,
    pub pdf: Option<PathBuf>,
    /// Command names in the order they ran.
    pub passes: Vec<String>,
    pub logs: Vec<PathBuf>,
    pub failure: Option<FailureClass>,
}

/// What an engine log says about the last pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogFindings {
    pub rerun: bool,
    /// Names of undefined references and citations; `?` when the log only
    /// reports that some exist.
    pub undefined: BTreeSet<String>,
}

static UNDEFINED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:LaTeX|Package \w+) Warning: (?:Reference|Citation) [`']([^'\s]*)' (?:on page \S+ )?undefined")
        .unwrap()
});

const RERUN_MARKERS: [&str; 4] = [
    "Rerun to get",
    "Label(s) may have changed",
    "Rerun LaTeX",
    "rerunfilecheck Warning",
];

pub fn parse_log(log: &str) -> LogFindings {
    let mut undefined: BTreeSet<String> = UNDEFINED.captures_iter(log).map(|c| c[1].to_string()).collect();
    if undefined.is_empty() && log.contains("There were undefined references") {
        undefined.insert("?".into());
    }
    LogFindings {
        rerun: RERUN_MARKERS.iter().any(|m| log.contains(m)),
        undefined,
    }
}

struct Driver<'a> {
    req: &'a LatexRequest,
    dir: PathBuf,
    stem: String,
    out: LatexOutcome,
}

impl Driver<'_> {
    /// Runs one command in the document directory and saves its log.
    /// Returns the engine log text (or captured output when there is none).
    fn run(&mut self, argv: Vec<String>, code: &str) -> Option<String> {
        let name = argv[0].clone();
        self.out.passes.push(name.clone());
        let n = self.out.passes.len();
        let result = Invocation::new(argv, &self.dir, self.req.timeout).run();
        let finished = match result {
            Ok(f) => f,
            Err(e) => {
                let message = match e {
                    ExecError::Timeout { seconds, .. } => format!("`{name}` exceeded {seconds} s"),
                    other => other.to_string(),
                };
                self.out.diagnostics.error(code, message);
                self.out.failure = Some(FailureClass::Tool);
                return None;
            }
        };
        let ext = if code == "EngineFailed" { "log" } else { "blg" };
        let tool_log = self.dir.join(format!("{}.{ext}", self.stem));
        let text = fs::read_to_string(&tool_log).unwrap_or_else(|_| format!("{}{}", finished.stdout, finished.stderr));
        let saved = self.req.logs_dir.join(format!("{n:02}-{}.log", file_name(&name)));
        if fs::create_dir_all(&self.req.logs_dir).is_ok() && fs::write(&saved, &text).is_ok() {
            self.out.logs.push(saved);
        }
        if !finished.success() {
            let status = finished
                .exit_code
                .map_or("a signal".to_string(), |c| format!("code {c}"));
            self.out
                .diagnostics
                .error(code, format!("`{name}` exited with {status}:\n{}", excerpt(&text, 15)));
            self.out.failure = Some(FailureClass::Tool);
            return None;
        }
        Some(text)
    }

    fn engine_pass(&mut self) -> Option<String> {
        let argv = vec![
            self.req.engine.clone(),
            "-interaction=nonstopmode".into(),
            "-halt-on-error".into(),
            format!("{}.tex", self.stem),
        ];
        self.run(argv, "EngineFailed")
    }
}

fn file_name(command: &str) -> String {
    Path::new(command)
        .file_name()
        .map_or_else(|| command.to_string(), |n| n.to_string_lossy().into_owned())
}

/// Runs engine, bibliography processor, engine, engine, then up to
/// [`MAX_EXTRA_PASSES`] more engine passes while the log asks for a rerun.
/// Logs are saved under `logs_dir`. Names still undefined after the last
/// pass become `UnresolvedAfterReruns` defects.
pub fn compile_latex(req: &LatexRequest) -> LatexOutcome {
    let dir = req
        .main_tex
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let stem = req
        .main_tex
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut d = Driver {
        req,
        dir,
        stem,
        out: LatexOutcome::default(),
    };

    if locate(&req.engine).is_none() {
        d.out
            .diagnostics
            .error("EngineFailed", format!("LaTeX engine `{}` not found", req.engine));
        d.out.failure = Some(FailureClass::Tool);
        return d.out;
    }
    if !req.main_tex.is_file() {
        d.out
            .diagnostics
            .error("EngineFailed", format!("{} does not exist", req.main_tex.display()));
        d.out.failure = Some(FailureClass::Tool);
        return d.out;
    }

    let Some(_) = d.engine_pass() else { return d.out };
    if req.run_bibliography {
        if locate(&req.bibliography_processor).is_none() {
            d.out.diagnostics.error(
                "BibliographyFailed",
                format!("bibliography processor `{}` not found", req.bibliography_processor),
            );
            d.out.failure = Some(FailureClass::Tool);
            return d.out;
        }
        let argv = vec![req.bibliography_processor.clone(), d.stem.clone()];
        if d.run(argv, "BibliographyFailed").is_none() {
            return d.out;
        }
    } else {
        d.out
            .diagnostics
            .notice("BibliographySkipped", "no citations; bibliography pass skipped");
    }
    let Some(_) = d.engine_pass() else { return d.out };
    let Some(mut log) = d.engine_pass() else { return d.out };
    for _ in 0..MAX_EXTRA_PASSES {
        if !parse_log(&log).rerun {
            break;
        }
        let Some(next) = d.engine_pass() else { return d.out };
        log = next;
    }

    let findings = parse_log(&log);
    for name in &findings.undefined {
        d.out.diagnostics.defect(
            req.mode,
            "UnresolvedAfterReruns",
            format!("`{name}` is still undefined after {} passes", d.out.passes.len()),
        );
    }
    if req.mode.is_strict() && !findings.undefined.is_empty() {
        d.out.failure = Some(FailureClass::Validation);
    }
    let pdf = d.dir.join(format!("{}.pdf", d.stem));
    if pdf.is_file() {
        d.out.pdf = Some(pdf);
    } else {
        d.out
            .diagnostics
            .error("EngineFailed", "engine finished without writing a PDF");
        d.out.failure = Some(FailureClass::Tool);
    }
    d.out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_markers() {
        let log = "LaTeX Warning: Reference `fig:x' on page 1 undefined on input line 5.\n\
                   LaTeX Warning: Citation `smith2020' on page 2 undefined on input line 9.\n\
                   LaTeX Warning: Label(s) may have changed. Rerun to get cross-references right.\n";
        let f = parse_log(log);
        assert!(f.rerun);
        assert_eq!(f.undefined.into_iter().collect::<Vec<_>>(), ["fig:x", "smith2020"]);

        let f = parse_log("LaTeX Warning: There were undefined references.\n");
        assert_eq!(f.undefined.len(), 1);
        assert!(!f.rerun);

        assert_eq!(parse_log("Output written on main.pdf"), LogFindings::default());
    }

    #[test]
    fn missing_engine_fails_before_any_pass() {
        let tmp = tempfile::tempdir().unwrap();
        let req = LatexRequest {
            main_tex: tmp.path().join("m.tex"),
            engine: "rxiv-absent-latex".into(),
            bibliography_processor: "bibtex".into(),
            run_bibliography: false,
            logs_dir: tmp.path().join("logs"),
            mode: Mode::Lenient,
            timeout: Duration::from_secs(5),
        };
        let out = compile_latex(&req);
        assert!(out.passes.is_empty());
        assert_eq!(out.failure, Some(FailureClass::Tool));
        assert_eq!(out.diagnostics.with_code("EngineFailed").count(), 1);
    }
}

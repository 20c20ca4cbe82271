//! The compile pass sequence, driven by shell scripts standing in for the
//! LaTeX engine and the bibliography processor.

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rxiv_core::pipeline::{compile_latex, FailureClass, LatexOutcome, LatexRequest};
use rxiv_core::Mode;

/// The engine counts its passes in `passes` next to the document and
/// writes a log built by `log_for`, a shell snippet that sees `$n`.
fn engine(dir: &Path, log_for: &str, pdf: bool, status: i32) -> PathBuf {
    let path = dir.join("fake-engine");
    let pdf_line = if pdf { "printf pdf > \"$stem.pdf\"" } else { ":" };
    let script = format!(
        "#!/bin/sh\n\
         for a; do doc=$a; done\n\
         stem=${{doc%.tex}}\n\
         n=$(( $(cat passes 2>/dev/null || echo 0) + 1 ))\n\
         echo $n > passes\n\
         {{ echo \"This is a fake engine, pass $n\"; {log_for}; }} > \"$stem.log\"\n\
         {pdf_line}\n\
         exit {status}\n"
    );
    fs::write(&path, script).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn bib_processor(dir: &Path) -> PathBuf {
    let path = dir.join("fake-bib");
    fs::write(&path, "#!/bin/sh\necho \"bib for $1\" > \"$1.blg\"\n").unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

struct Setup {
    tmp: tempfile::TempDir,
    request: LatexRequest,
}

fn setup(log_for: &str, pdf: bool, status: i32) -> Setup {
    let tmp = tempfile::tempdir().unwrap();
    let doc_dir = tmp.path().join("output");
    fs::create_dir(&doc_dir).unwrap();
    fs::write(doc_dir.join("01_MAIN.tex"), "\\documentclass{article}").unwrap();
    let request = LatexRequest {
        main_tex: doc_dir.join("01_MAIN.tex"),
        engine: engine(tmp.path(), log_for, pdf, status).display().to_string(),
        bibliography_processor: bib_processor(tmp.path()).display().to_string(),
        run_bibliography: true,
        logs_dir: doc_dir.join("logs"),
        mode: Mode::Lenient,
        timeout: Duration::from_secs(20),
    };
    Setup { tmp, request }
}

fn names(out: &LatexOutcome) -> Vec<&str> {
    out.passes.iter().map(|p| p.rsplit('/').next().unwrap()).collect()
}

#[test]
fn clean_sequence() {
    let s = setup("echo 'Output written on 01_MAIN.pdf'", true, 0);
    let out = compile_latex(&s.request);
    assert_eq!(names(&out), ["fake-engine", "fake-bib", "fake-engine", "fake-engine"]);
    assert!(!out.diagnostics.has_errors(), "{:?}", out.diagnostics);
    assert_eq!(out.failure, None);
    assert_eq!(out.pdf, Some(s.tmp.path().join("output/01_MAIN.pdf")));
    let logs: Vec<String> = out
        .logs
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        logs,
        [
            "01-fake-engine.log",
            "02-fake-bib.log",
            "03-fake-engine.log",
            "04-fake-engine.log"
        ]
    );
    assert_eq!(fs::read_to_string(&out.logs[1]).unwrap(), "bib for 01_MAIN\n");
    assert!(fs::read_to_string(&out.logs[3]).unwrap().contains("pass 3"));
}

#[test]
fn no_citations_skips_bibliography() {
    let mut s = setup(":", true, 0);
    s.request.run_bibliography = false;
    let out = compile_latex(&s.request);
    assert_eq!(names(&out), ["fake-engine"; 3]);
    assert_eq!(out.diagnostics.with_code("BibliographySkipped").count(), 1);
}

#[test]
fn rerun_marker_adds_passes_until_settled() {
    let s = setup(
        "if [ $n -lt 4 ]; then echo 'LaTeX Warning: Label(s) may have changed. Rerun to get cross-references right.'; fi",
        true,
        0,
    );
    let out = compile_latex(&s.request);
    assert_eq!(names(&out).iter().filter(|n| **n == "fake-engine").count(), 4);
    assert_eq!(out.failure, None);
}

#[test]
fn extra_passes_are_capped() {
    let s = setup("echo 'Rerun to get cross-references right.'", true, 0);
    let out = compile_latex(&s.request);
    assert_eq!(names(&out).iter().filter(|n| **n == "fake-engine").count(), 3 + 2);
}

#[test]
fn persistent_undefined_reference() {
    let log = "echo \"LaTeX Warning: Reference \\`fig:ghost' on page 1 undefined on input line 3.\"";
    let s = setup(log, true, 0);
    let out = compile_latex(&s.request);
    let d: Vec<_> = out.diagnostics.with_code("UnresolvedAfterReruns").collect();
    assert_eq!(d.len(), 1);
    assert!(d[0].message.contains("fig:ghost"));
    assert!(!d[0].is_error());
    assert_eq!(out.failure, None);

    let mut s = setup(log, true, 0);
    s.request.mode = Mode::Strict;
    let out = compile_latex(&s.request);
    assert!(out.diagnostics.with_code("UnresolvedAfterReruns").all(|d| d.is_error()));
    assert_eq!(out.failure, Some(FailureClass::Validation));
}

#[test]
fn engine_error_stops_the_sequence() {
    let s = setup("echo '! Undefined control sequence.'", false, 1);
    let out = compile_latex(&s.request);
    assert_eq!(out.passes.len(), 1);
    assert_eq!(out.failure, Some(FailureClass::Tool));
    let d: Vec<_> = out.diagnostics.with_code("EngineFailed").collect();
    assert_eq!(d.len(), 1);
    assert!(d[0].message.contains("Undefined control sequence"), "{}", d[0].message);
    assert_eq!(out.logs.len(), 1);
}

#[test]
fn missing_pdf_is_a_tool_failure() {
    let s = setup(":", false, 0);
    let out = compile_latex(&s.request);
    assert_eq!(out.pdf, None);
    assert_eq!(out.failure, Some(FailureClass::Tool));
    assert!(out
        .diagnostics
        .with_code("EngineFailed")
        .any(|d| d.message.contains("PDF")));
}

#[test]
fn missing_bibliography_processor() {
    let mut s = setup(":", true, 0);
    s.request.bibliography_processor = "rxiv-no-such-bibtex".into();
    let out = compile_latex(&s.request);
    assert_eq!(out.passes.len(), 1);
    assert_eq!(out.diagnostics.with_code("BibliographyFailed").count(), 1);
    assert_eq!(out.failure, Some(FailureClass::Tool));
}

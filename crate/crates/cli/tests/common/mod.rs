#![allow(dead_code)]

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

pub fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/minimal")
}

/// Copies the fixture manuscript into a fresh temporary directory, leaving
/// out build products.
pub fn fixture_copy() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    copy_tree(&fixture(), tmp.path());
    tmp
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        if name == "output" || name == "workflow.png" || name == ".rxiv_cache.json" {
            continue;
        }
        let path = entry.path();
        if path.is_dir() {
            copy_tree(&path, &to.join(&name));
        } else {
            fs::copy(&path, to.join(&name)).unwrap();
        }
    }
}

pub fn write_executable(path: &Path, body: &str) {
    fs::write(path, body).unwrap();
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
}

/// A stand-in for every generator. Appends one line to `counter` per
/// invocation and writes a PNG-named output the way the real tool would:
/// to the `-o` argument for diagram tools, next to the source for scripts.
pub fn fake_generator(dir: &Path, counter: &Path) -> PathBuf {
    let path = dir.join("fake-generator");
    write_executable(
        &path,
        &format!(
            "#!/bin/sh\n\
             echo \"$@\" >> '{}'\n\
             if [ \"$1\" = \"-i\" ]; then printf out > \"$4\"; exit 0; fi\n\
             b=$(basename \"$1\")\n\
             printf out > \"$RXIV_FIGURES_DIR/${{b%.*}}.png\"\n",
            counter.display()
        ),
    );
    path
}

pub fn invocations(counter: &Path) -> usize {
    fs::read_to_string(counter).map(|s| s.lines().count()).unwrap_or(0)
}

/// Runs the CLI with captured streams; returns (exit code, stdout, stderr).
pub fn rxiv(args: &[&str]) -> (i32, String, String) {
    rxiv_env(args, None)
}

pub fn rxiv_env(args: &[&str], engine_env: Option<&str>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rxiv").chain(args.iter().copied());
    let code = rxiv_cli::run(argv, engine_env.map(String::from), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// A manuscript with no figures referenced and three generator sources
/// whose commands all point at one fake generator.
pub fn generator_manuscript(generator: &Path) -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let g = generator.display();
    fs::write(
        root.join("00_CONFIG.yml"),
        format!(
            "title: Cache test\ngenerators:\n  mermaid: ['{g}']\n  python: ['{g}']\n  r: ['{g}']\n  timeout_seconds: 20\n"
        ),
    )
    .unwrap();
    fs::write(root.join("01_MAIN.md"), "Text only.\n").unwrap();
    fs::write(root.join("03_REFERENCES.bib"), "").unwrap();
    fs::create_dir(root.join("FIGURES")).unwrap();
    fs::write(root.join("FIGURES/flow.mmd"), "graph TD; A-->B\n").unwrap();
    fs::write(root.join("FIGURES/plot.py"), "print('plot')\n").unwrap();
    fs::write(root.join("FIGURES/stats.R"), "cat('stats')\n").unwrap();
    tmp
}

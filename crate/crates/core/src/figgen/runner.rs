use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;
use walkdir::WalkDir;

use super::{FigureAsset, FigureKind, Timestamp, MANIFEST_FILE};
use crate::exec::{self, ExecError, Invocation};
use crate::layout::GeneratorCommands;

/// One completed generator execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorRun {
    /// Argument vectors, one per invocation (mermaid runs once per format).
    pub commands: Vec<Vec<String>>,
    pub working_dir: PathBuf,
    pub timeout_seconds: u64,
    pub captured_stdout: String,
    pub captured_stderr: String,
    pub exit_code: i32,
    /// Produced files, absolute, in lexicographic order.
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("generator command `{command}` not found on the executable search path")]
    Missing { command: String },
    #[error("generator exited with {}: {stderr}", exit_code.map_or("a signal".to_string(), |c| format!("code {c}")))]
    Failed { exit_code: Option<i32>, stderr: String },
    #[error("generator exceeded the {seconds} s timeout")]
    Timeout { seconds: u64 },
    #[error("generator reported success but did not write {}", .0.display())]
    MissingOutput(PathBuf),
    #[error("{0} sources are not generated")]
    NotGenerator(FigureKind),
    #[error("cannot start generator: {0}")]
    Io(#[from] io::Error),
}

impl GeneratorError {
    pub fn code(&self) -> &'static str {
        match self {
            GeneratorError::Missing { .. } => "GeneratorMissing",
            GeneratorError::Timeout { .. } => "GeneratorTimeout",
            _ => "GeneratorFailed",
        }
    }
}

type Snapshot = BTreeMap<PathBuf, (Timestamp, u64)>;

fn snapshot(dir: &Path) -> Snapshot {
    WalkDir::new(dir)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'))
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.file_name() != MANIFEST_FILE)
        .filter_map(|e| {
            let len = e.metadata().ok()?.len();
            let stamp = Timestamp::of(e.path()).ok()?;
            Some((e.path().to_path_buf(), (stamp, len)))
        })
        .collect()
}

/// Files that are new in `after`, or whose mtime or size changed.
fn created(before: &Snapshot, after: &Snapshot) -> Vec<PathBuf> {
    after
        .iter()
        .filter(|(path, stamp)| before.get(*path) != Some(stamp))
        .map(|(path, _)| path.clone())
        .collect()
}

fn invoke(argv: Vec<String>, cwd: &Path, timeout: u64) -> Result<exec::Finished, GeneratorError> {
    let invocation = Invocation::new(argv, cwd, Duration::from_secs(timeout)).env("RXIV_FIGURES_DIR", cwd);
    let finished = invocation.run().map_err(|e| match e {
        ExecError::NotFound(command) => GeneratorError::Missing { command },
        ExecError::Timeout { seconds, .. } => GeneratorError::Timeout { seconds },
        ExecError::Spawn { source, .. } => GeneratorError::Io(source),
    })?;
    if !finished.success() {
        return Err(GeneratorError::Failed {
            exit_code: finished.exit_code,
            stderr: exec::excerpt(&finished.stderr, 20),
        });
    }
    Ok(finished)
}

/// Runs the generator for `asset`.
///
/// Mermaid sources are rendered to SVG, PNG and PDF beside the source.
/// Scripts run with the figures directory as working directory and
/// `RXIV_FIGURES_DIR` set to it; every file they create or modify there is
/// an output. Scripts that share a figures directory must not run
/// concurrently, since outputs are found by comparing directory snapshots.
pub fn run_generator(asset: &FigureAsset, commands: &GeneratorCommands) -> Result<GeneratorRun, GeneratorError> {
    let prefix = match asset.kind {
        FigureKind::Mermaid => &commands.mermaid,
        FigureKind::PyScript => &commands.python,
        FigureKind::RScript => &commands.r,
        kind => return Err(GeneratorError::NotGenerator(kind)),
    };
    let Some(program) = prefix.first() else {
        return Err(GeneratorError::Missing { command: String::new() });
    };
    if exec::locate(program).is_none() {
        return Err(GeneratorError::Missing {
            command: program.clone(),
        });
    }
    let cwd = std::path::absolute(&asset.figures_dir)?;
    let source = std::path::absolute(&asset.source_path)?;
    let timeout = commands.timeout_seconds.max(1);
    let mut run = GeneratorRun {
        commands: Vec::new(),
        working_dir: cwd.clone(),
        timeout_seconds: timeout,
        captured_stdout: String::new(),
        captured_stderr: String::new(),
        exit_code: 0,
        outputs: Vec::new(),
    };
    let record = |run: &mut GeneratorRun, argv: Vec<String>| -> Result<(), GeneratorError> {
        run.commands.push(argv.clone());
        let finished = invoke(argv, &cwd, timeout)?;
        run.captured_stdout.push_str(&finished.stdout);
        run.captured_stderr.push_str(&finished.stderr);
        Ok(())
    };

    if asset.kind == FigureKind::Mermaid {
        for ext in ["svg", "png", "pdf"] {
            let out = source.with_extension(ext);
            let mut argv = prefix.clone();
            argv.extend([
                "-i".into(),
                source.display().to_string(),
                "-o".into(),
                out.display().to_string(),
            ]);
            record(&mut run, argv)?;
            if !out.is_file() {
                return Err(GeneratorError::MissingOutput(out));
            }
            run.outputs.push(out);
        }
        run.outputs.sort();
    } else {
        let before = snapshot(&cwd);
        let mut argv = prefix.clone();
        argv.push(source.display().to_string());
        record(&mut run, argv)?;
        run.outputs = created(&before, &snapshot(&cwd))
            .into_iter()
            .filter(|p| *p != source)
            .collect();
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn snapshot_difference_oracle() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        fs::write(dir.join("keep.txt"), "k").unwrap();
        fs::write(dir.join("change.png"), "1").unwrap();
        let before = snapshot(dir);
        fs::write(dir.join("change.png"), "22").unwrap();
        fs::write(dir.join("new.pdf"), "n").unwrap();
        fs::write(dir.join(".hidden"), "h").unwrap();
        let got = created(&before, &snapshot(dir));
        assert_eq!(got, vec![dir.join("change.png"), dir.join("new.pdf")]);
    }

    #[test]
    fn static_assets_are_not_run() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("a.png"), "x").unwrap();
        let asset = FigureAsset::load(tmp.path(), &tmp.path().join("a.png"))
            .unwrap()
            .unwrap();
        assert!(matches!(
            run_generator(&asset, &GeneratorCommands::default()),
            Err(GeneratorError::NotGenerator(FigureKind::Static))
        ));
    }

    #[test]
    fn missing_command() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("a.py"), "x").unwrap();
        let asset = FigureAsset::load(tmp.path(), &tmp.path().join("a.py"))
            .unwrap()
            .unwrap();
        let commands = GeneratorCommands {
            python: vec!["rxiv-no-such-interpreter".into()],
            ..GeneratorCommands::default()
        };
        let err = run_generator(&asset, &commands).unwrap_err();
        assert_eq!(err.code(), "GeneratorMissing");
    }
}

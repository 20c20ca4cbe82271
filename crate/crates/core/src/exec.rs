//! Argument-vector subprocess execution with output capture and a wall-clock timeout.

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;
use wait_timeout::ChildExt;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("command `{0}` not found on the executable search path")]
    NotFound(String),
    #[error("failed to start `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{program}` did not finish within {seconds} s")]
    Timeout { program: String, seconds: u64 },
}

/// A finished process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finished {
    /// `None` when the process was terminated by a signal.
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
}

impl Finished {
    pub fn success(&self) -> bool {
        self.exit_code == Some(0)
    }
}

/// Resolves `program` against `PATH` (or as a path when it contains a separator).
pub fn locate(program: &str) -> Option<PathBuf> {
    which::which(program).ok()
}

/// A command line plus where and how to run it.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    pub env: Vec<(String, OsString)>,
    pub timeout: Duration,
}

impl Invocation {
    pub fn new(argv: Vec<String>, cwd: impl AsRef<Path>, timeout: Duration) -> Self {
        Invocation {
            argv,
            cwd: cwd.as_ref().to_path_buf(),
            env: Vec::new(),
            timeout,
        }
    }

    pub fn env(mut self, key: &str, value: impl Into<OsString>) -> Self {
        self.env.push((key.to_string(), value.into()));
        self
    }

    pub fn program(&self) -> &str {
        self.argv.first().map(String::as_str).unwrap_or("")
    }

    /// Runs the command. The environment is inherited plus `env`; stdin is closed.
    pub fn run(&self) -> Result<Finished, ExecError> {
        let program = self.program().to_string();
        let resolved = locate(&program).ok_or_else(|| ExecError::NotFound(program.clone()))?;
        let start = Instant::now();
        let mut child = Command::new(resolved)
            .args(&self.argv[1..])
            .current_dir(&self.cwd)
            .envs(self.env.iter().map(|(k, v)| (k, v)))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| ExecError::Spawn {
                program: program.clone(),
                source,
            })?;

        let stdout = reader(child.stdout.take());
        let stderr = reader(child.stderr.take());

        let status = child.wait_timeout(self.timeout).map_err(|source| ExecError::Spawn {
            program: program.clone(),
            source,
        })?;
        let Some(status) = status else {
            let _ = child.kill();
            let _ = child.wait();
            // Reader threads are left detached: grandchildren may still hold the pipes.
            return Err(ExecError::Timeout {
                program,
                seconds: self.timeout.as_secs(),
            });
        };
        Ok(Finished {
            exit_code: status.code(),
            stdout: stdout.join().unwrap_or_default(),
            stderr: stderr.join().unwrap_or_default(),
            elapsed: start.elapsed(),
        })
    }
}

fn reader<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut pipe) = pipe {
            let _ = pipe.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// The last `max_lines` non-empty lines of `text`.
pub fn excerpt(text: &str, max_lines: usize) -> String {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    lines[lines.len().saturating_sub(max_lines)..].join("\n")
}

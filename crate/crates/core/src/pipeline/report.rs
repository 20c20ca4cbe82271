use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Stage;
use crate::Diagnostics;

pub const REPORT_FILE: &str = "build_report.json";

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// The manuscript has errors.
    pub const VALIDATION: i32 = 1;
    /// A tool is missing or failed.
    pub const TOOL: i32 = 2;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

/// What kind of problem failed a stage; selects the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureClass {
    Validation,
    Tool,
}

impl FailureClass {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureClass::Validation => exit::VALIDATION,
            FailureClass::Tool => exit::TOOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureClass>,
    pub duration_seconds: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub stages: Vec<StageReport>,
    pub artifacts: Vec<PathBuf>,
    pub exit_code: i32,
}

impl BuildReport {
    /// Assembles a report. Nonexistent artifacts are dropped, and the exit
    /// code follows from the first failed stage; in strict mode any error
    /// diagnostic also makes it nonzero.
    pub fn new(stages: Vec<StageReport>, artifacts: Vec<PathBuf>, strict: bool) -> BuildReport {
        let mut artifacts: Vec<PathBuf> = artifacts.into_iter().filter(|p| p.is_file()).collect();
        artifacts.sort();
        artifacts.dedup();
        let failed = stages
            .iter()
            .find(|s| s.status == StageStatus::Failed)
            .map(|s| s.failure.unwrap_or(FailureClass::Validation).exit_code());
        let strict_errors = strict && stages.iter().any(|s| s.diagnostics.has_errors());
        let exit_code = failed.unwrap_or(if strict_errors { exit::VALIDATION } else { exit::SUCCESS });
        BuildReport {
            stages,
            artifacts,
            exit_code,
        }
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = &crate::Diagnostic> {
        self.stages.iter().flat_map(|s| s.diagnostics.iter())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, output_dir: &Path) -> io::Result<PathBuf> {
        fs::create_dir_all(output_dir)?;
        let path = output_dir.join(REPORT_FILE);
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stage(stage: Stage, status: StageStatus, failure: Option<FailureClass>, errors: usize) -> StageReport {
        let mut diagnostics = Diagnostics::new();
        for _ in 0..errors {
            diagnostics.error("X", "x");
        }
        StageReport {
            stage,
            status,
            failure,
            duration_seconds: 0.0,
            diagnostics,
        }
    }

    #[test]
    fn exit_codes() {
        let ok = vec![stage(Stage::EnvSetup, StageStatus::Ok, None, 1)];
        assert_eq!(BuildReport::new(ok.clone(), vec![], false).exit_code, 0);
        assert_eq!(BuildReport::new(ok, vec![], true).exit_code, 1);
        let tool = vec![stage(
            Stage::LatexCompilation,
            StageStatus::Failed,
            Some(FailureClass::Tool),
            1,
        )];
        assert_eq!(BuildReport::new(tool, vec![], false).exit_code, 2);
    }

    #[test]
    fn artifacts_must_exist() {
        let tmp = tempfile::tempdir().unwrap();
        let real = tmp.path().join("a.tex");
        fs::write(&real, "x").unwrap();
        let report = BuildReport::new(vec![], vec![tmp.path().join("gone.pdf"), real.clone()], false);
        assert_eq!(report.artifacts, vec![real]);
    }

    #[test]
    fn json_keys_in_stable_order() {
        let report = BuildReport::new(
            vec![stage(Stage::EnvSetup, StageStatus::Skipped, None, 0)],
            vec![],
            false,
        );
        let json = report.to_json();
        let parsed: BuildReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
        assert!(json.find("\"stages\"").unwrap() < json.find("\"exit_code\"").unwrap());
        assert!(json.contains("\"env_setup\""));
    }
}

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five build stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    EnvSetup,
    ContentGeneration,
    MarkdownProcessing,
    AssetAggregation,
    LatexCompilation,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::EnvSetup,
        Stage::ContentGeneration,
        Stage::MarkdownProcessing,
        Stage::AssetAggregation,
        Stage::LatexCompilation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::EnvSetup => "env_setup",
            Stage::ContentGeneration => "content_generation",
            Stage::MarkdownProcessing => "markdown_processing",
            Stage::AssetAggregation => "asset_aggregation",
            Stage::LatexCompilation => "latex_compilation",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("unknown stage `{0}`; expected one of env_setup, content_generation, markdown_processing, asset_aggregation, latex_compilation")]
    UnknownStage(String),
    #[error("markdown_processing cannot be skipped")]
    RequiredStage,
}

impl FromStr for Stage {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| PlanError::UnknownStage(s.to_string()))
    }
}

/// Which stages run. Order is fixed; only membership varies.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildPlan {
    pub skip: BTreeSet<Stage>,
    pub strict: bool,
}

impl BuildPlan {
    pub fn new(skip: impl IntoIterator<Item = Stage>, strict: bool) -> Result<BuildPlan, PlanError> {
        let skip: BTreeSet<Stage> = skip.into_iter().collect();
        if skip.contains(&Stage::MarkdownProcessing) {
            return Err(PlanError::RequiredStage);
        }
        Ok(BuildPlan { skip, strict })
    }

    pub fn runs(&self, stage: Stage) -> bool {
        !self.skip.contains(&stage)
    }

    /// Every stage in order, paired with whether it is planned to run.
    pub fn stages(&self) -> impl Iterator<Item = (Stage, bool)> + '_ {
        Stage::ALL.into_iter().map(|s| (s, self.runs(s)))
    }
}

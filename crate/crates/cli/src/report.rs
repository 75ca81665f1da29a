//! Run reports: one JSON document per run plus CSV tables whose bytes are
//! reproducible under identical config and seed.

use crate::config::ExperimentConfig;
use anyhow::{Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunVerdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: ToolInfo,
    pub experiment: &'static str,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// None for experiments that only estimate (no pass/fail semantics).
    pub verdict: Option<RunVerdict>,
    pub summary: serde_json::Value,
    pub artifacts: Vec<String>,
    pub wall_clock_secs: f64,
}

pub struct OutputDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write_csv(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self, mut report: RunReport) -> Result<()> {
        report.artifacts = std::mem::take(&mut self.artifacts);
        let path = self.dir.join("report.json");
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(&path, json)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

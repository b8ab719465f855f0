//! Run manifests: a JSON record of what a command was asked to do and
//! which files it produced.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use subgec::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub dataset: PathBuf,
    pub git_describe: String,
    pub seed: u64,
    pub started_at: String,
    /// Set once the run has finished successfully.
    pub finished_at: Option<String>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(config: TrainConfig, dataset: &Path, outputs: Vec<PathBuf>) -> Self {
        Self {
            seed: config.seed,
            config,
            dataset: dataset.to_path_buf(),
            git_describe: git_describe(),
            started_at: now(),
            finished_at: None,
            outputs,
        }
    }

    pub fn finish(&mut self) {
        self.finished_at = Some(now());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("{} is not a run manifest", path.display()))
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// `git describe --always --dirty` of the working directory, or `unknown`
/// outside a repository.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_owned())
}

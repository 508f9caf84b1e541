use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{to_json, write_atomic, PipelineError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    /// Outputs were reused from an earlier run with the same key.
    pub cached: bool,
    pub millis: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub provider_calls: u64,
    pub dropped_contexts: usize,
    pub degraded_contexts: usize,
    pub warnings: usize,
    pub failed_signals: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalStatus {
    Ok,
    Cached,
    NoAssertions,
    Failed(String),
}

/// What a run did: config snapshot, input hashes, stage timings,
/// artifacts (relative to the run directory) and counters. Rewritten as
/// a whole after every command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<String>,
    pub counters: Counters,
    pub signals: BTreeMap<String, SignalStatus>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self, PipelineError> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Other(format!("no manifest at {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))
    }

    /// Existing manifest or an empty one.
    pub fn load_or_default(run_dir: &Path) -> Self {
        Self::load(run_dir).unwrap_or_default()
    }

    pub fn record_stage(&mut self, rec: StageRecord) {
        self.stages.retain(|s| s.name != rec.name);
        self.stages.push(rec);
    }

    pub fn add_artifact(&mut self, rel: impl Into<String>) {
        let rel = rel.into();
        if let Err(i) = self.artifacts.binary_search(&rel) {
            self.artifacts.insert(i, rel);
        }
    }

    /// Drops artifact entries whose files are gone, then writes.
    pub fn save(&mut self, run_dir: &Path) -> Result<(), PipelineError> {
        self.artifacts.retain(|a| run_dir.join(a).exists());
        write_atomic(&run_dir.join(MANIFEST_FILE), to_json(self).as_bytes())
    }
}

//! Multi-resolution context synthesis: global and per-signal summaries,
//! LLM pruning of retrieved and walked contexts, budgeted prompt assembly,
//! and plan/assertion generation.

mod assemble;
mod generate;
mod prune;
mod summarize;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use assemble::{
    assemble_prompts, global_summary_text, AssembledPrompt, AssemblyConfig, PlanPromptRenderer, PromptBundle, PromptParts,
    PromptRenderer,
};
pub use generate::{
    extract_plans, extract_sva_blocks, generate_plans, generate_svas, Plan, PlanOutput, SvaBlocks, SvaOutput, SvaRecord,
    PLANS_PER_CALL, PLAN_PREFIX, SVA_PREFIX,
};
pub use prune::{parse_selection, prune, PruneReport, PrunerConfig};
pub use summarize::{fit_prompt, generate_global_summaries, generate_signal_description, SummaryInputs};

use crate::context::ContextItem;
use crate::template::TemplateError;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("signal {0} is not in the valid-signal set")]
    UnknownSignal(String),
    #[error("fixed preamble needs {needed} tokens but the prompt limit is {limit}")]
    PreambleOverflow { needed: usize, limit: usize },
    #[error("invalid pruner configuration: {0}")]
    PrunerConfig(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Generated contexts keyed by content hash, in memory and optionally on
/// disk. Concurrent writers of the same key store the same value, so the
/// last write wins harmlessly.
#[derive(Debug, Default)]
pub struct ContextCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, ContextItem>>,
}

impl ContextCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        ContextCache {
            dir: Some(dir.into()),
            mem: Mutex::default(),
        }
    }

    pub fn key(parts: &[&str]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<ContextItem> {
        if let Some(hit) = self.mem.lock().expect("cache lock").get(key) {
            return Some(hit.clone());
        }
        let dir = self.dir.as_ref()?;
        let text = std::fs::read_to_string(Self::path(dir, key)).ok()?;
        let item: ContextItem = serde_json::from_str(&text).ok()?;
        self.mem.lock().expect("cache lock").insert(key.to_string(), item.clone());
        Some(item)
    }

    /// Degraded items are never stored.
    pub fn put(&self, key: &str, item: &ContextItem) {
        if item.degraded {
            return;
        }
        self.mem.lock().expect("cache lock").insert(key.to_string(), item.clone());
        if let Some(dir) = &self.dir {
            let write = || -> std::io::Result<()> {
                std::fs::create_dir_all(dir)?;
                let path = Self::path(dir, key);
                let tmp = path.with_extension(format!("tmp{}", std::process::id()));
                std::fs::write(&tmp, serde_json::to_string_pretty(item).expect("item serializes"))?;
                std::fs::rename(tmp, path)
            };
            if let Err(e) = write() {
                log::warn!("context cache write failed: {e}");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ContextType;

    #[test]
    fn cache_persists_and_skips_degraded() {
        let d = tempfile::tempdir().unwrap();
        let item = ContextItem::new(ContextType::SummaryDesign, "", "text");
        let k = ContextCache::key(&["a", "b"]);
        ContextCache::on_disk(d.path()).put(&k, &item);
        assert_eq!(ContextCache::on_disk(d.path()).get(&k), Some(item.clone()));
        let c = ContextCache::in_memory();
        c.put(&k, &item.mark_degraded());
        assert!(c.get(&k).is_none());
        assert_ne!(ContextCache::key(&["ab", ""]), ContextCache::key(&["a", "b"]));
    }
}

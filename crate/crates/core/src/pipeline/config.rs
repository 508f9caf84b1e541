use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::ingest::IngestConfig;
use crate::llm::HttpConfig;
use crate::retrieval::{GridConfig, DEFAULT_TOP_K};
use crate::synthesis::PrunerConfig;
use crate::walk::{TypeWeightTable, WalkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputsConfig {
    pub spec: PathBuf,
    pub rtl: Vec<PathBuf>,
    pub include_dirs: Vec<PathBuf>,
    pub top: Option<String>,
    pub schema: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    /// Directory of `<template>.txt` overrides.
    pub prompts_dir: Option<PathBuf>,
    pub relation_verbs: Option<PathBuf>,
}

impl Default for InputsConfig {
    fn default() -> Self {
        InputsConfig {
            spec: PathBuf::from("spec.txt"),
            rtl: Vec::new(),
            include_dirs: Vec::new(),
            top: None,
            schema: None,
            abbreviations: None,
            prompts_dir: None,
            relation_verbs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    pub top_k: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            grid: GridConfig::default(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Directory of mock script `*.toml` files.
    pub mock_dir: Option<PathBuf>,
    pub http: HttpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub inputs: InputsConfig,
    pub ingest: IngestConfig,
    pub retrieval: RetrievalConfig,
    pub walk: WalkConfig,
    pub type_weights: TypeWeightTable,
    pub pruner: PrunerConfig,
    /// Prompts per signal.
    pub prompt_budget: usize,
    pub provider: ProviderConfig,
    pub seed: u64,
    pub run_dir: PathBuf,
    /// Restricts generation to these signals when non-empty.
    pub signals: Vec<String>,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: InputsConfig::default(),
            ingest: IngestConfig::default(),
            retrieval: RetrievalConfig::default(),
            walk: WalkConfig::default(),
            type_weights: TypeWeightTable::default(),
            pruner: PrunerConfig::default(),
            prompt_budget: 3,
            provider: ProviderConfig::default(),
            seed: 0,
            run_dir: PathBuf::from("run"),
            signals: Vec::new(),
            workers: 4,
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase_paths(base);
        Ok(cfg)
    }

    pub fn rebase_paths(&mut self, base: &Path) {
        let i = &mut self.inputs;
        rebase(base, &mut i.spec);
        i.rtl.iter_mut().chain(i.include_dirs.iter_mut()).for_each(|p| rebase(base, p));
        for p in [&mut i.schema, &mut i.abbreviations, &mut i.prompts_dir, &mut i.relation_verbs, &mut self.provider.mock_dir]
            .into_iter()
            .flatten()
        {
            rebase(base, p);
        }
        rebase(base, &mut self.run_dir);
    }

    /// The walk settings actually used: the run seed overrides the walk's.
    pub fn effective_walk(&self) -> WalkConfig {
        WalkConfig {
            seed: self.seed,
            ..self.walk.clone()
        }
    }

    /// Checks referenced paths and numeric invariants. `needs_spec` and
    /// `needs_rtl` select which inputs the calling stage reads.
    pub fn validate(&self, needs_spec: bool, needs_rtl: bool) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if needs_spec && !self.inputs.spec.is_file() {
            return bad(format!("spec file {} not found", self.inputs.spec.display()));
        }
        if needs_rtl {
            if self.inputs.rtl.is_empty() {
                return bad("no RTL files configured".into());
            }
            if let Some(p) = self.inputs.rtl.iter().find(|p| !p.is_file()) {
                return bad(format!("RTL file {} not found", p.display()));
            }
            if let Some(p) = self.inputs.include_dirs.iter().find(|p| !p.is_dir()) {
                return bad(format!("include dir {} not found", p.display()));
            }
        }
        let i = &self.inputs;
        for p in [&i.schema, &i.abbreviations, &i.relation_verbs].into_iter().flatten() {
            if !p.is_file() {
                return bad(format!("{} not found", p.display()));
            }
        }
        if let Some(p) = &i.prompts_dir {
            if !p.is_dir() {
                return bad(format!("prompts dir {} not found", p.display()));
            }
        }
        if self.provider.kind == ProviderKind::Mock {
            match &self.provider.mock_dir {
                Some(d) if d.is_dir() => {}
                Some(d) => return bad(format!("mock dir {} not found", d.display())),
                None => return bad("mock provider selected without mock_dir".into()),
            }
        }
        self.walk.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.retrieval.grid.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.pruner.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.retrieval.top_k == 0 {
            return bad("retrieval.top_k must be at least 1".into());
        }
        if self.prompt_budget == 0 {
            return bad("prompt_budget must be at least 1".into());
        }
        if self.ingest.overlap_tokens >= self.ingest.chunk_tokens {
            return bad("ingest.overlap_tokens must be below chunk_tokens".into());
        }
        let dup: BTreeSet<&String> = self.signals.iter().collect();
        if dup.len() != self.signals.len() {
            return bad("duplicate entries in signals".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::from_toml("seed = 7\n[walk]\nwalks_per_signal = 5\n[retrieval]\nscales = [50]\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.walk.walks_per_signal, 5);
        assert_eq!(c.walk.alpha, 0.3);
        assert_eq!(c.retrieval.grid.scales, [50]);
        assert_eq!(c.retrieval.top_k, 20);
        assert_eq!(c.pruner.max_total, 100);
        assert_eq!(c.prompt_budget, 3);
        assert_eq!(c.effective_walk().seed, 7);
    }

    #[test]
    fn validation_errors() {
        let d = tempfile::tempdir().unwrap();
        let mut c = RunConfig::default();
        c.rebase_paths(d.path());
        assert!(matches!(c.validate(true, false), Err(PipelineError::Config(_))));
        std::fs::write(d.path().join("spec.txt"), "x").unwrap();
        c.validate(true, false).unwrap();
        c.pruner.min_per_type = 80;
        assert!(c.validate(true, false).is_err());
        assert!(RunConfig::from_toml("seed = \"x\"").is_err());
    }
}

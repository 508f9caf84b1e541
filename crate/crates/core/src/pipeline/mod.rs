//! End-to-end orchestration: configuration, run directories, stage
//! caching and the per-signal generation loop behind the CLI.

mod commands;
mod config;
mod manifest;
mod stages;

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use commands::{cmd_build_kg, cmd_extract_signals, cmd_generate, cmd_refine_kg, cmd_report, layout, GenerateSummary, ValidSignals};
pub use config::{InputsConfig, ProviderConfig, ProviderKind, RetrievalConfig, RunConfig};
pub use manifest::{Counters, RunManifest, SignalStatus, StageRecord};
pub use stages::{kg_path_contexts, run_signal, signal_node, SignalArtifacts, SignalEnv, WalkDump};

use crate::llm::{CachingProvider, HttpProvider, LlmError, LlmProvider, MockProvider, MockScript};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("no results: {0}")]
    EmptyResult(String),
    #[error("{0}")]
    Other(String),
}

impl PipelineError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Other(_) => 1,
            PipelineError::Config(_) => 2,
            PipelineError::Parse(_) => 3,
            PipelineError::Provider(_) => 4,
            PipelineError::EmptyResult(_) => 5,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Other(e.to_string())
    }
}

impl From<LlmError> for PipelineError {
    fn from(e: LlmError) -> Self {
        PipelineError::Provider(e.to_string())
    }
}

/// Counts calls that reach the wrapped provider.
pub struct CountingProvider<P> {
    inner: P,
    calls: AtomicU64,
}

impl<P: LlmProvider> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        CountingProvider {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<P: LlmProvider> LlmProvider for CountingProvider<P> {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(prompt, max_output_tokens)
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn context_window(&self) -> usize {
        self.inner.context_window()
    }
}

/// The configured provider, plus a string identifying its behaviour for
/// stage keys. Mock replies are not disk-cached so script edits take
/// effect immediately.
pub fn make_provider(cfg: &RunConfig) -> Result<(Box<dyn LlmProvider>, String), PipelineError> {
    match cfg.provider.kind {
        ProviderKind::Mock => {
            let dir = cfg
                .provider
                .mock_dir
                .as_ref()
                .ok_or_else(|| PipelineError::Config("mock provider selected without mock_dir".into()))?;
            let script = MockScript::load_dir(dir).map_err(|e| PipelineError::Config(e.to_string()))?;
            let ident = format!("mock:{}", hash_dir_tomls(dir)?);
            let mock = MockProvider::new(script).with_context_window(cfg.provider.http.context_window);
            Ok((Box::new(mock), ident))
        }
        ProviderKind::Http => {
            let http = &cfg.provider.http;
            let ident = format!("http:{}:{}:{}", http.endpoint, http.model_id, http.temperature);
            let p = CachingProvider::new(HttpProvider::new(http.clone()), layout::llm_cache(&cfg.run_dir));
            Ok((Box::new(p), ident))
        }
    }
}

fn hash_dir_tomls(dir: &Path) -> Result<String, PipelineError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let bytes = std::fs::read(&f)?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Length-prefixed SHA-256 over the parts.
pub fn content_key(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Writes via a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

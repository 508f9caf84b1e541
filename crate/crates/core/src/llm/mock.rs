use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{LlmError, LlmProvider};

/// Leading marker of replies produced for unscripted prompts.
pub const ECHO_PREFIX: &str = "MOCK-ECHO[";

/// Characters of the normalized prompt that feed the fingerprint.
pub const DEFAULT_FINGERPRINT_PREFIX: usize = 8192;

/// Fingerprint of a prompt: first 16 hex digits of SHA-256 over the
/// whitespace-collapsed prompt, truncated to `prefix_chars` characters.
pub fn fingerprint(prompt: &str, prefix_chars: usize) -> String {
    let normalized: String = prompt
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .chars()
        .take(prefix_chars)
        .collect();
    let digest = Sha256::digest(normalized.as_bytes());
    hex::encode(&digest[..8])
}

/// True for the deterministic echo a [`MockProvider`] returns when no
/// script entry matches.
pub fn is_echo(reply: &str) -> bool {
    reply.starts_with(ECHO_PREFIX)
}

/// One scripted reply. Matches either an exact fingerprint or every
/// substring in `contains`; `error` simulates a provider failure.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
pub struct MockRule {
    #[serde(default)]
    pub fingerprint: Option<String>,
    #[serde(default)]
    pub contains: Vec<String>,
    #[serde(default)]
    pub reply: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
}

impl MockRule {
    pub fn contains(needles: &[&str], reply: impl Into<String>) -> Self {
        MockRule {
            contains: needles.iter().map(|s| s.to_string()).collect(),
            reply: Some(reply.into()),
            ..Default::default()
        }
    }

    pub fn fingerprint(fp: impl Into<String>, reply: impl Into<String>) -> Self {
        MockRule {
            fingerprint: Some(fp.into()),
            reply: Some(reply.into()),
            ..Default::default()
        }
    }

    pub fn failing(needles: &[&str], error: impl Into<String>) -> Self {
        MockRule {
            contains: needles.iter().map(|s| s.to_string()).collect(),
            error: Some(error.into()),
            ..Default::default()
        }
    }

    fn matches_substrings(&self, prompt: &str) -> bool {
        !self.contains.is_empty() && self.contains.iter().all(|n| prompt.contains(n.as_str()))
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
pub struct MockScript {
    #[serde(default, rename = "reply")]
    pub rules: Vec<MockRule>,
}

#[derive(Debug, thiserror::Error)]
pub enum MockScriptError {
    #[error("cannot read mock script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid mock script {path}: {source}")]
    Format {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

impl MockScript {
    pub fn new(rules: Vec<MockRule>) -> Self {
        MockScript { rules }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads every `*.toml` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, MockScriptError> {
        let io = |source| MockScriptError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        let mut script = MockScript::default();
        for path in files {
            let text = std::fs::read_to_string(&path).map_err(|source| MockScriptError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let part = Self::from_toml(&text).map_err(|source| MockScriptError::Format {
                path: path.display().to_string(),
                source,
            })?;
            script.rules.extend(part.rules);
        }
        Ok(script)
    }
}

/// Deterministic offline provider.
///
/// Lookup order: exact fingerprint entries, then substring rules in script
/// order, then an echo reply embedding the fingerprint and the prompt's
/// first line.
#[derive(Debug)]
pub struct MockProvider {
    script: MockScript,
    prefix_chars: usize,
    context_window: usize,
    calls: Mutex<BTreeMap<String, u64>>,
    total: AtomicU64,
    unmatched: Mutex<BTreeMap<String, String>>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        MockProvider {
            script,
            prefix_chars: DEFAULT_FINGERPRINT_PREFIX,
            context_window: 128_000,
            calls: Mutex::new(BTreeMap::new()),
            total: AtomicU64::new(0),
            unmatched: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn echo() -> Self {
        Self::new(MockScript::default())
    }

    pub fn with_context_window(mut self, tokens: usize) -> Self {
        self.context_window = tokens;
        self
    }

    pub fn with_prefix_chars(mut self, chars: usize) -> Self {
        self.prefix_chars = chars;
        self
    }

    pub fn fingerprint_of(&self, prompt: &str) -> String {
        fingerprint(prompt, self.prefix_chars)
    }

    /// Calls made for a given fingerprint.
    pub fn calls_for(&self, fp: &str) -> u64 {
        self.calls.lock().unwrap().get(fp).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> u64 {
        self.total.load(Ordering::SeqCst)
    }

    /// Fingerprints that fell through to the echo reply, with the prompt's
    /// first line. Handy for authoring scripts.
    pub fn unmatched(&self) -> BTreeMap<String, String> {
        self.unmatched.lock().unwrap().clone()
    }

    fn lookup(&self, fp: &str, prompt: &str) -> Option<&MockRule> {
        self.script
            .rules
            .iter()
            .find(|r| r.fingerprint.as_deref() == Some(fp))
            .or_else(|| self.script.rules.iter().find(|r| r.matches_substrings(prompt)))
    }
}

fn first_line(prompt: &str) -> String {
    prompt
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .chars()
        .take(120)
        .collect()
}

impl LlmProvider for MockProvider {
    fn complete(&self, prompt: &str, _max_output_tokens: usize) -> Result<String, LlmError> {
        let fp = self.fingerprint_of(prompt);
        *self.calls.lock().unwrap().entry(fp.clone()).or_insert(0) += 1;
        self.total.fetch_add(1, Ordering::SeqCst);
        match self.lookup(&fp, prompt) {
            Some(rule) => match (&rule.error, &rule.reply) {
                (Some(err), _) => Err(LlmError::Unavailable(err.clone())),
                (None, Some(reply)) => Ok(reply.clone()),
                (None, None) => Ok(String::new()),
            },
            None => {
                let line = first_line(prompt);
                self.unmatched
                    .lock()
                    .unwrap()
                    .insert(fp.clone(), line.clone());
                Ok(format!("{ECHO_PREFIX}{fp}] {line}"))
            }
        }
    }

    fn model_id(&self) -> &str {
        "mock"
    }

    fn context_window(&self) -> usize {
        self.context_window
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_fingerprint_reply() {
        let fp = fingerprint("hello   world", DEFAULT_FINGERPRINT_PREFIX);
        let p = MockProvider::new(MockScript::new(vec![MockRule::fingerprint(
            fp.clone(),
            "scripted",
        )]));
        // whitespace differences normalize away
        assert_eq!(p.complete("hello world", 10).unwrap(), "scripted");
        assert_eq!(p.calls_for(&fp), 1);
    }

    #[test]
    fn unscripted_echo_contains_fingerprint() {
        let p = MockProvider::echo();
        let reply = p.complete("Summarize this\nbody", 10).unwrap();
        let fp = p.fingerprint_of("Summarize this\nbody");
        assert!(is_echo(&reply));
        assert!(reply.contains(&fp));
        assert!(reply.ends_with("Summarize this"));
        assert_eq!(p.complete("Summarize this\nbody", 10).unwrap(), reply);
    }

    #[test]
    fn counter_increments_once_per_call() {
        let p = MockProvider::echo();
        for i in 1..=3 {
            p.complete("x", 1).unwrap();
            assert_eq!(p.total_calls(), i);
        }
        assert_eq!(p.calls_for(&p.fingerprint_of("x")), 3);
    }

    #[test]
    fn substring_rules_and_failures() {
        let p = MockProvider::new(MockScript::new(vec![
            MockRule::failing(&["explode"], "boom"),
            MockRule::contains(&["alpha", "beta"], "both"),
        ]));
        assert_eq!(p.complete("alpha and beta", 1).unwrap(), "both");
        assert!(is_echo(&p.complete("alpha only", 1).unwrap()));
        assert_eq!(
            p.complete("please explode", 1),
            Err(LlmError::Unavailable("boom".into()))
        );
    }

    #[test]
    fn parses_toml_script() {
        let s = MockScript::from_toml(
            r#"
            [[reply]]
            contains = ["Plan"]
            reply = "Plan: x"
            [[reply]]
            fingerprint = "00ff"
            error = "down"
            "#,
        )
        .unwrap();
        assert_eq!(s.rules.len(), 2);
        assert_eq!(s.rules[1].fingerprint.as_deref(), Some("00ff"));
    }
}

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{LlmError, LlmProvider};

/// Disk-backed reply cache keyed by `(model_id, max_output_tokens, prompt)`.
///
/// Re-running a stage with identical prompts performs no provider calls.
/// Errors are never cached.
#[derive(Debug)]
pub struct CachingProvider<P> {
    inner: P,
    dir: PathBuf,
}

impl<P: LlmProvider> CachingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        CachingProvider {
            inner,
            dir: dir.into(),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, prompt: &str, max_output_tokens: usize) -> PathBuf {
        let mut h = Sha256::new();
        h.update(self.inner.model_id().as_bytes());
        h.update([0]);
        h.update(max_output_tokens.to_le_bytes());
        h.update(prompt.as_bytes());
        let key = hex::encode(h.finalize());
        self.dir.join(&key[..2]).join(format!("{key}.txt"))
    }
}

impl<P: LlmProvider> LlmProvider for CachingProvider<P> {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        let path = self.entry_path(prompt, max_output_tokens);
        if let Ok(hit) = std::fs::read_to_string(&path) {
            return Ok(hit);
        }
        let reply = self.inner.complete(prompt, max_output_tokens)?;
        let store = || -> std::io::Result<()> {
            let parent = path.parent().expect("cache entry has a parent");
            std::fs::create_dir_all(parent)?;
            let tmp = tempfile_path(&path);
            std::fs::write(&tmp, &reply)?;
            std::fs::rename(&tmp, &path)
        };
        if let Err(e) = store() {
            log::warn!("cannot store reply cache entry {}: {e}", path.display());
        }
        Ok(reply)
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn context_window(&self) -> usize {
        self.inner.context_window()
    }
}

fn tempfile_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockProvider;

    #[test]
    fn second_call_is_served_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mock = MockProvider::echo();
        let cached = CachingProvider::new(&mock, dir.path());
        let a = cached.complete("prompt one", 8).unwrap();
        let b = cached.complete("prompt one", 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(mock.total_calls(), 1);
        cached.complete("prompt two", 8).unwrap();
        assert_eq!(mock.total_calls(), 2);
    }
}

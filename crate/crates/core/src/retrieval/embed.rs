use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding service: {0}")]
    Service(String),
    #[error("missing API key in ${0}")]
    MissingKey(String),
    #[error("expected {expected} vectors of dimension {dimension}, got {got}")]
    Shape {
        expected: usize,
        dimension: usize,
        got: String,
    },
}

/// Text → dense vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Identity used in cache keys.
    fn id(&self) -> String;

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Feature-hashed character n-grams, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dimension: usize,
    pub min_n: usize,
    pub max_n: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder {
            dimension: 256,
            min_n: 3,
            max_n: 5,
        }
    }
}

fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn l2_normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

impl HashingEmbedder {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        // collapse whitespace so layout does not change the vector
        let norm: Vec<char> = format!(" {} ", text.split_whitespace().collect::<Vec<_>>().join(" "))
            .to_lowercase()
            .chars()
            .collect();
        let mut buf = [0u8; 4];
        for n in self.min_n..=self.max_n {
            for w in norm.windows(n) {
                let h = fnv1a(w.iter().flat_map(|c| c.encode_utf8(&mut buf).as_bytes().to_vec()));
                let slot = (h % self.dimension as u64) as usize;
                let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
                v[slot] += sign;
            }
        }
        l2_normalize(&mut v);
        v
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn id(&self) -> String {
        format!("hash-char{}-{}-d{}", self.min_n, self.max_n, self.dimension)
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub dimension: usize,
    pub timeout_secs: u64,
    pub batch_size: usize,
}

impl Default for HttpEmbedderConfig {
    fn default() -> Self {
        HttpEmbedderConfig {
            endpoint: "https://api.openai.com/v1/embeddings".into(),
            model: "text-embedding-3-small".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            dimension: 1536,
            timeout_secs: 60,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    cfg: HttpEmbedderConfig,
}

impl HttpEmbedder {
    pub fn new(cfg: HttpEmbedderConfig) -> Self {
        HttpEmbedder { cfg }
    }

    fn batch(&self, key: &str, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(self.cfg.timeout_secs)))
            .build()
            .into();
        let body = serde_json::json!({ "model": self.cfg.model, "input": texts });
        let reply: serde_json::Value = agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| EmbedError::Service(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Service(e.to_string()))?;
        let data = reply["data"].as_array().ok_or_else(|| EmbedError::Service("reply has no data array".into()))?;
        let mut out = Vec::with_capacity(data.len());
        for item in data {
            let mut v: Vec<f64> = item["embedding"]
                .as_array()
                .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                .unwrap_or_default();
            if v.len() != self.cfg.dimension {
                return Err(EmbedError::Shape {
                    expected: texts.len(),
                    dimension: self.cfg.dimension,
                    got: format!("dimension {}", v.len()),
                });
            }
            l2_normalize(&mut v);
            out.push(v);
        }
        if out.len() != texts.len() {
            return Err(EmbedError::Shape {
                expected: texts.len(),
                dimension: self.cfg.dimension,
                got: format!("{} vectors", out.len()),
            });
        }
        Ok(out)
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.cfg.dimension
    }

    fn id(&self) -> String {
        format!("http:{}:{}", self.cfg.endpoint, self.cfg.model)
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let key = std::env::var(&self.cfg.api_key_env).map_err(|_| EmbedError::MissingKey(self.cfg.api_key_env.clone()))?;
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.cfg.batch_size.max(1)) {
            out.extend(self.batch(&key, chunk)?);
        }
        Ok(out)
    }
}

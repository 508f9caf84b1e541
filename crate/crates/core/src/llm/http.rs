use std::io::Write;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LlmError, LlmProvider};

/// Remote chat-completion settings. The API key is never stored here; only
/// the name of the environment variable that holds it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model_id: String,
    pub api_key_env: String,
    pub context_window: usize,
    pub max_in_flight: usize,
    pub timeout_seconds: u64,
    pub temperature: f64,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub system_prompt: String,
    /// When set, each exchange is appended to `<log_dir>/llm_calls.jsonl`.
    pub log_dir: Option<PathBuf>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            context_window: 128_000,
            max_in_flight: 4,
            timeout_seconds: 120,
            temperature: 0.0,
            max_attempts: 3,
            backoff_base_ms: 500,
            system_prompt: "You are an expert in hardware design verification.".into(),
            log_dir: None,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Slots {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// OpenAI-style chat-completion client.
pub struct HttpProvider {
    cfg: HttpConfig,
    agent: ureq::Agent,
    slots: Slots,
    log_lock: Mutex<()>,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("cfg", &self.cfg).finish()
    }
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_seconds.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let slots = Slots::new(cfg.max_in_flight);
        HttpProvider {
            cfg,
            agent,
            slots,
            log_lock: Mutex::new(()),
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    fn api_key(&self) -> Result<String, LlmError> {
        match std::env::var(&self.cfg.api_key_env) {
            Ok(k) if !k.trim().is_empty() => Ok(k),
            _ => Err(LlmError::Auth(format!(
                "environment variable {} is not set",
                self.cfg.api_key_env
            ))),
        }
    }

    fn request_body(&self, prompt: &str, max_output_tokens: usize) -> Value {
        json!({
            "model": self.cfg.model_id,
            "temperature": self.cfg.temperature,
            "max_tokens": max_output_tokens,
            "messages": [
                {"role": "system", "content": self.cfg.system_prompt},
                {"role": "user", "content": prompt},
            ],
        })
    }

    fn attempt(&self, key: &str, body: &Value) -> Result<String, LlmError> {
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send_json(body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        match status {
            200..=299 => extract_text(&text),
            401 | 403 => Err(LlmError::Auth(format!("HTTP {status}"))),
            429 => Err(LlmError::RateLimited { attempts: 1 }),
            _ => Err(LlmError::Http {
                status,
                body: text.chars().take(500).collect(),
            }),
        }
    }

    fn log_exchange(&self, body: &Value, outcome: &Result<String, LlmError>, attempts: u32) {
        let Some(dir) = &self.cfg.log_dir else { return };
        let entry = json!({
            "endpoint": self.cfg.endpoint,
            "authorization": "Bearer [REDACTED]",
            "request": body,
            "attempts": attempts,
            "response": outcome.as_ref().ok(),
            "error": outcome.as_ref().err().map(|e| e.to_string()),
        });
        let _guard = self.log_lock.lock().unwrap();
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(dir)?;
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join("llm_calls.jsonl"))?;
            writeln!(f, "{entry}")
        };
        if let Err(e) = write() {
            log::warn!("cannot write provider log: {e}");
        }
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
fn extract_text(raw: &str) -> Result<String, LlmError> {
    let v: Value =
        serde_json::from_str(raw).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
}

impl LlmProvider for HttpProvider {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        let key = self.api_key()?;
        let body = self.request_body(prompt, max_output_tokens);
        let _slot = self.slots.acquire();
        let max_attempts = self.cfg.max_attempts.max(1);
        let mut attempt = 0;
        let outcome = loop {
            attempt += 1;
            match self.attempt(&key, &body) {
                Err(e) if e.is_transient() && attempt < max_attempts => {
                    let delay = self.cfg.backoff_base_ms << (attempt - 1);
                    log::debug!("transient provider error ({e}); retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                }
                Err(LlmError::RateLimited { .. }) => {
                    break Err(LlmError::RateLimited { attempts: attempt })
                }
                other => break other,
            }
        };
        self.log_exchange(&body, &outcome, attempt);
        outcome
    }

    fn model_id(&self) -> &str {
        &self.cfg.model_id
    }

    fn context_window(&self) -> usize {
        self.cfg.context_window
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves the given (status, body) replies in order, one per connection.
    fn stub_server(replies: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((mut stream, _)) = listener.accept() else { return };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                let _ = reader.read_exact(&mut buf);
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            }
        });
        (format!("http://{addr}/v1/chat/completions"), hits)
    }

    fn cfg(endpoint: String, env: &str) -> HttpConfig {
        HttpConfig {
            endpoint,
            api_key_env: env.into(),
            backoff_base_ms: 1,
            timeout_seconds: 5,
            ..Default::default()
        }
    }

    #[test]
    fn extracts_text_from_stub() {
        std::env::set_var("KGSVA_TEST_KEY_OK", "secret");
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"Plan: x"}}]}"#;
        let (url, hits) = stub_server(vec![(200, body.into())]);
        let p = HttpProvider::new(cfg(url, "KGSVA_TEST_KEY_OK"));
        assert_eq!(p.complete("hi", 16).unwrap(), "Plan: x");
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn rate_limited_after_three_attempts() {
        std::env::set_var("KGSVA_TEST_KEY_429", "secret");
        let (url, hits) = stub_server(vec![(429, "{}".into()); 3]);
        let p = HttpProvider::new(cfg(url, "KGSVA_TEST_KEY_429"));
        assert_eq!(
            p.complete("hi", 16),
            Err(LlmError::RateLimited { attempts: 3 })
        );
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn missing_credential_fails_before_network() {
        std::env::remove_var("KGSVA_TEST_KEY_MISSING");
        let (url, hits) = stub_server(vec![(200, "{}".into())]);
        let p = HttpProvider::new(cfg(url, "KGSVA_TEST_KEY_MISSING"));
        assert!(matches!(p.complete("hi", 16), Err(LlmError::Auth(_))));
        assert_eq!(hits.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn malformed_body_is_typed() {
        std::env::set_var("KGSVA_TEST_KEY_BAD", "secret");
        let (url, _) = stub_server(vec![(200, r#"{"choices":[]}"#.into())]);
        let p = HttpProvider::new(cfg(url, "KGSVA_TEST_KEY_BAD"));
        assert!(matches!(
            p.complete("hi", 16),
            Err(LlmError::MalformedResponse(_))
        ));
    }

    #[test]
    fn log_redacts_key() {
        std::env::set_var("KGSVA_TEST_KEY_LOG", "supersecret");
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"choices":[{"message":{"content":"ok"}}]}"#;
        let (url, _) = stub_server(vec![(200, body.into())]);
        let mut c = cfg(url, "KGSVA_TEST_KEY_LOG");
        c.log_dir = Some(dir.path().to_path_buf());
        HttpProvider::new(c).complete("hi", 4).unwrap();
        let log = std::fs::read_to_string(dir.path().join("llm_calls.jsonl")).unwrap();
        assert!(log.contains("REDACTED"));
        assert!(!log.contains("supersecret"));
    }
}

//! Text-completion providers and token counting.
//!
//! Every network call in the crate goes through [`HttpProvider`]. Tests and
//! offline runs use [`MockProvider`], a pure function of the prompt and a
//! scripted fixture set.

mod cache;
mod http;
mod mock;
mod tokens;

use std::sync::Arc;

use thiserror::Error;

pub use cache::CachingProvider;
pub use http::{HttpConfig, HttpProvider};
pub use mock::{fingerprint, is_echo, MockProvider, MockRule, MockScript, ECHO_PREFIX};
pub use tokens::{HeuristicCounter, TokenCounter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
}

impl LlmError {
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::RateLimited { .. } | LlmError::Transport(_) => true,
            LlmError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

pub trait LlmProvider: Send + Sync {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError>;

    fn model_id(&self) -> &str;

    /// Context window in tokens.
    fn context_window(&self) -> usize;
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        (**self).complete(prompt, max_output_tokens)
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn context_window(&self) -> usize {
        (**self).context_window()
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for Arc<P> {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        (**self).complete(prompt, max_output_tokens)
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn context_window(&self) -> usize {
        (**self).context_window()
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for Box<P> {
    fn complete(&self, prompt: &str, max_output_tokens: usize) -> Result<String, LlmError> {
        (**self).complete(prompt, max_output_tokens)
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn context_window(&self) -> usize {
        (**self).context_window()
    }
}

/// Default output allowance requested from providers.
pub const DEFAULT_MAX_OUTPUT_TOKENS: usize = 4096;

/// Prompt token limit: 75% of the context window.
pub fn prompt_token_limit(context_window: usize) -> usize {
    context_window * 3 / 4
}

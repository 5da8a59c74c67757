//! Model backends: chat (LLM/VLM) and embedding endpoints.
//!
//! One chat wire shape with an optional image attachment serves both the
//! language and the vision role. [`StubChat`] and [`ScriptedChat`] are pure
//! stand-ins for offline runs and tests.

mod http;
mod limit;
mod stub;

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use http::{HttpChat, HttpEmbedder};
pub use limit::{Limiter, Permit};
pub use stub::{stub_digest_response, ScriptedChat, StubChat};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageAttachment {
    pub media_type: String,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    pub image: Option<ImageAttachment>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
            image: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
            image: None,
        }
    }

    pub fn with_image(mut self, media_type: impl Into<String>, data: Vec<u8>) -> Self {
        self.image = Some(ImageAttachment {
            media_type: media_type.into(),
            data,
        });
        self
    }
}

/// Token and time accounting for one backend call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UsageRecord {
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub wall_ms: u64,
}

impl UsageRecord {
    pub fn tokens_total(&self) -> u64 {
        self.tokens_in + self.tokens_out
    }

    pub fn merge(self, other: UsageRecord) -> UsageRecord {
        UsageRecord {
            tokens_in: self.tokens_in + other.tokens_in,
            tokens_out: self.tokens_out + other.tokens_out,
            wall_ms: self.wall_ms + other.wall_ms,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatExchange {
    pub messages: Vec<ChatMessage>,
    pub response_text: String,
    pub usage: UsageRecord,
}

pub trait ChatBackend: Send + Sync {
    /// Short provenance label, e.g. `stub` or `http:<model>`.
    fn name(&self) -> String;

    fn chat(&self, messages: Vec<ChatMessage>) -> Result<ChatExchange>;
}

pub(crate) fn check_messages(messages: &[ChatMessage]) -> Result<()> {
    if !messages.iter().any(|m| m.role == Role::User) {
        return Err(Error::Input("a chat exchange needs at least one user message".into()));
    }
    Ok(())
}

pub(crate) fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Exponential backoff: `base, 2*base, 4*base, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub base_delay_ms: u64,
    /// Randomize each delay within `[d/2, d]`.
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_delay_ms: 250,
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << retry.min(20));
        if self.jitter && ms > 1 {
            Duration::from_millis(rand::thread_rng().gen_range(ms / 2..=ms))
        } else {
            Duration::from_millis(ms)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(skip)]
    pub api_key: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_retries() -> u32 {
    2
}

impl BackendConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            api_key: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::Configuration("backend timeout must be positive".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Configuration(format!(
                "backend base_url {:?} is not an HTTP(S) URL",
                self.base_url
            )));
        }
        Ok(())
    }

    pub(crate) fn endpoint(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }
}

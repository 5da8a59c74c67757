//! Clients for the open chat-completion and embeddings wire schema.

use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::{json, Value};

use super::{
    check_messages, whitespace_tokens, BackendConfig, ChatBackend, ChatExchange, ChatMessage,
    Limiter, UsageRecord,
};
use crate::error::{Error, Result};
use crate::index::{Embedded, EmbeddingProvider, EmbeddingVector};

pub const CHAT_PATH: &str = "/v1/chat/completions";
pub const EMBEDDINGS_PATH: &str = "/v1/embeddings";

#[derive(Debug)]
struct Transport {
    cfg: BackendConfig,
    client: reqwest::blocking::Client,
    limiter: Arc<Limiter>,
}

enum Attempt {
    Done(Value),
    Retry(Error),
    Fail(Error),
}

impl Transport {
    fn new(cfg: BackendConfig, limiter: Arc<Limiter>) -> Result<Self> {
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::Configuration(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            cfg,
            client,
            limiter,
        })
    }

    fn attempt(&self, url: &str, body: &Value) -> Attempt {
        let _permit = self.limiter.acquire();
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(Error::Timeout { attempts: 0 }),
            Err(e) => return Attempt::Retry(Error::Transport(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(Error::Timeout { attempts: 0 }),
            Err(e) => return Attempt::Retry(Error::Transport(e.to_string())),
        };
        if status.is_success() {
            match serde_json::from_str(&text) {
                Ok(v) => Attempt::Done(v),
                Err(e) => Attempt::Fail(Error::Protocol(format!("response is not JSON: {e}"))),
            }
        } else {
            let err = Error::Status {
                status: status.as_u16(),
                body: text.chars().take(512).collect(),
            };
            if status.is_server_error() || status.as_u16() == 429 {
                Attempt::Retry(err)
            } else {
                Attempt::Fail(err)
            }
        }
    }

    /// POST with up to `max_retries` retries on transport errors, timeouts,
    /// 429 and 5xx responses. Returns the parsed body and total wall time.
    fn post_json(&self, path: &str, body: &Value) -> Result<(Value, u64)> {
        let url = self.cfg.endpoint(path);
        let started = Instant::now();
        let attempts = self.cfg.max_retries + 1;
        let mut last = None;
        for n in 0..attempts {
            match self.attempt(&url, body) {
                Attempt::Done(v) => return Ok((v, started.elapsed().as_millis() as u64)),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => last = Some(e),
            }
            if n + 1 < attempts {
                thread::sleep(self.cfg.retry.delay(n));
            }
        }
        Err(match last {
            Some(Error::Timeout { .. }) => Error::Timeout { attempts },
            Some(e) => e,
            None => Error::Transport("no attempt was made".into()),
        })
    }
}

fn message_json(m: &ChatMessage) -> Value {
    match &m.image {
        None => json!({"role": m.role.as_str(), "content": m.content}),
        Some(img) => {
            let data = base64::engine::general_purpose::STANDARD.encode(&img.data);
            json!({
                "role": m.role.as_str(),
                "content": [
                    {"type": "text", "text": m.content},
                    {"type": "image_url", "image_url": {"url": format!("data:{};base64,{}", img.media_type, data)}},
                ],
            })
        }
    }
}

fn usage_field(body: &Value, key: &str) -> Option<u64> {
    body.get("usage")?.get(key)?.as_u64()
}

/// Chat-completion client (`POST {base_url}/v1/chat/completions`).
#[derive(Debug)]
pub struct HttpChat {
    transport: Transport,
}

impl HttpChat {
    pub fn new(cfg: BackendConfig, limiter: Arc<Limiter>) -> Result<Self> {
        Ok(Self {
            transport: Transport::new(cfg, limiter)?,
        })
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.transport.cfg.model_name,
            "messages": messages.iter().map(message_json).collect::<Vec<_>>(),
        })
    }
}

impl ChatBackend for HttpChat {
    fn name(&self) -> String {
        format!("http:{}", self.transport.cfg.model_name)
    }

    fn chat(&self, messages: Vec<ChatMessage>) -> Result<ChatExchange> {
        check_messages(&messages)?;
        let body = self.request_body(&messages);
        let (resp, wall_ms) = self.transport.post_json(CHAT_PATH, &body)?;
        let response_text = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Protocol("missing choices[0].message.content".into()))?
            .to_string();
        if response_text.trim().is_empty() {
            return Err(Error::Protocol("backend returned an empty response".into()));
        }
        let usage = UsageRecord {
            tokens_in: usage_field(&resp, "prompt_tokens")
                .unwrap_or_else(|| messages.iter().map(|m| whitespace_tokens(&m.content)).sum()),
            tokens_out: usage_field(&resp, "completion_tokens")
                .unwrap_or_else(|| whitespace_tokens(&response_text)),
            wall_ms,
        };
        Ok(ChatExchange {
            messages,
            response_text,
            usage,
        })
    }
}

/// Embeddings client (`POST {base_url}/v1/embeddings`). Vectors are
/// unit-normalized on arrival; the dimension is pinned by the first response
/// unless configured up front.
#[derive(Debug)]
pub struct HttpEmbedder {
    transport: Transport,
    dim: OnceLock<usize>,
}

impl HttpEmbedder {
    pub fn new(cfg: BackendConfig, limiter: Arc<Limiter>) -> Result<Self> {
        Ok(Self {
            transport: Transport::new(cfg, limiter)?,
            dim: OnceLock::new(),
        })
    }

    pub fn with_dim(self, dim: usize) -> Self {
        let _ = self.dim.set(dim);
        self
    }

    fn parse(&self, resp: &Value, expected: usize) -> Result<Vec<EmbeddingVector>> {
        let data = resp
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Protocol("missing data array".into()))?;
        if data.len() != expected {
            return Err(Error::Protocol(format!(
                "requested {expected} embeddings, received {}",
                data.len()
            )));
        }
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let index = item
                .get("index")
                .and_then(Value::as_u64)
                .map(|i| i as usize)
                .unwrap_or(pos);
            let values = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Protocol("missing embedding".into()))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| Error::Protocol("non-numeric embedding value".into())))
                .collect::<Result<Vec<f64>>>()?;
            rows.push((index, values));
        }
        rows.sort_by_key(|(i, _)| *i);
        if rows.iter().enumerate().any(|(pos, (i, _))| pos != *i) {
            return Err(Error::Protocol("embedding indices are not 0..n".into()));
        }
        rows.into_iter()
            .map(|(_, values)| {
                let dim = *self.dim.get_or_init(|| values.len());
                if values.len() != dim {
                    return Err(Error::Protocol(format!(
                        "embedding has {} values, expected {dim}",
                        values.len()
                    )));
                }
                EmbeddingVector::normalized(&values)
                    .map_err(|e| Error::Protocol(format!("unusable embedding: {e}")))
            })
            .collect()
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn tag(&self) -> String {
        format!("remote:{}", self.transport.cfg.model_name)
    }

    fn dim(&self) -> Option<usize> {
        self.dim.get().copied()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Embedded> {
        if texts.is_empty() {
            return Err(Error::Input("embedding batch is empty".into()));
        }
        let body = json!({"model": self.transport.cfg.model_name, "input": texts});
        let (resp, wall_ms) = self.transport.post_json(EMBEDDINGS_PATH, &body)?;
        let vectors = self.parse(&resp, texts.len())?;
        let tokens_in = usage_field(&resp, "prompt_tokens")
            .unwrap_or_else(|| texts.iter().map(|t| whitespace_tokens(t)).sum());
        Ok(Embedded {
            vectors,
            usage: UsageRecord {
                tokens_in,
                tokens_out: 0,
                wall_ms,
            },
        })
    }
}

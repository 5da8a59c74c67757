use sha2::{Digest, Sha256};

use super::{check_messages, whitespace_tokens, ChatBackend, ChatExchange, ChatMessage, Role, UsageRecord};
use crate::error::Result;

/// `STUB:` followed by the hex SHA-256 of the concatenated user content
/// (text, then attached image bytes, message by message).
pub fn stub_digest_response(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for m in messages.iter().filter(|m| m.role == Role::User) {
        hasher.update(m.content.as_bytes());
        if let Some(img) = &m.image {
            hasher.update(&img.data);
        }
    }
    format!("STUB:{}", hex::encode(hasher.finalize()))
}

fn usage_for(messages: &[ChatMessage], response: &str) -> UsageRecord {
    UsageRecord {
        tokens_in: messages.iter().map(|m| whitespace_tokens(&m.content)).sum(),
        tokens_out: whitespace_tokens(response),
        wall_ms: 0,
    }
}

/// Deterministic chat backend. Its reply is a pure function of the user
/// content, so every fixture generated with it can be regenerated offline.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubChat;

impl ChatBackend for StubChat {
    fn name(&self) -> String {
        "stub".into()
    }

    fn chat(&self, messages: Vec<ChatMessage>) -> Result<ChatExchange> {
        check_messages(&messages)?;
        let response_text = stub_digest_response(&messages);
        let usage = usage_for(&messages, &response_text);
        Ok(ChatExchange {
            messages,
            response_text,
            usage,
        })
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct ScriptedChat {
    pub response: String,
}

impl ScriptedChat {
    pub fn new(response: impl Into<String>) -> Self {
        Self {
            response: response.into(),
        }
    }
}

impl ChatBackend for ScriptedChat {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn chat(&self, messages: Vec<ChatMessage>) -> Result<ChatExchange> {
        check_messages(&messages)?;
        let usage = usage_for(&messages, &self.response);
        Ok(ChatExchange {
            messages,
            response_text: self.response.clone(),
            usage,
        })
    }
}

//! Provider-agnostic streaming chat completion.
//!
//! Agents talk to models only through [`ChatProvider`]. The live
//! implementation speaks an OpenAI-compatible streaming endpoint; tests use
//! [`ReplayProvider`], which serves chunk sequences recorded by
//! [`RecordingProvider`] from fixture files keyed by [`fixture_key`].

mod http;
mod record;
mod replay;
mod scheduler;
mod scripted;

pub use http::{HttpChatProvider, SseLineDecoder, ENV_LLM_KEY, ENV_LLM_URL};
pub use record::RecordingProvider;
pub use replay::{read_fixture, write_fixture, Latency, ReplayProvider};
pub use scheduler::{Admission, AdmissionPermit, AdmissionQueue, RatePolicy, Scheduler, SchedulerError};
pub use scripted::{chunk_text, FlakyProvider, ScriptedProvider};

use std::pin::Pin;
use std::time::Duration;

use async_trait::async_trait;
use futures::{Stream, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Agent role and round, e.g. `legal_interpreter:r0`.
    pub tag: String,
}

impl ChatRequest {
    pub fn new(tag: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            tag: tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| LlmError::InvalidRequest("messages must not be empty".into()))?;
        if first.role != ChatRole::System {
            return Err(LlmError::InvalidRequest("first message must be a system message".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("temperature {} < 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamChunk {
    pub text: String,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

impl StreamChunk {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), done: false, usage: None }
    }

    pub fn done() -> Self {
        Self { text: String::new(), done: true, usage: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("context window exceeded")]
    ContextOverflow,
    #[error("no fixture {key} for request tagged {tag}")]
    FixtureMissing { key: String, tag: String },
    #[error("fixture io: {0}")]
    Fixture(String),
    #[error("malformed provider response: {0}")]
    Protocol(String),
}

impl LlmError {
    /// Errors worth one retry under the agent retry policy.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::ProviderUnavailable(_) | LlmError::RateLimited { .. })
    }

    /// Short machine-friendly reason used in failure events.
    pub fn reason_code(&self) -> &'static str {
        match self {
            LlmError::InvalidRequest(_) => "InvalidRequest",
            LlmError::ProviderUnavailable(_) => "ProviderUnavailable",
            LlmError::RateLimited { .. } => "RateLimited",
            LlmError::ContextOverflow => "ContextOverflow",
            LlmError::FixtureMissing { .. } => "FixtureMissing",
            LlmError::Fixture(_) => "FixtureIo",
            LlmError::Protocol(_) => "Protocol",
        }
    }
}

pub type ChunkStream = Pin<Box<dyn Stream<Item = Result<StreamChunk, LlmError>> + Send>>;

#[async_trait]
pub trait ChatProvider: Send + Sync {
    /// Opens a completion stream. Callers should go through [`complete_stream`].
    async fn stream(&self, req: &ChatRequest) -> Result<ChunkStream, LlmError>;

    /// `live`, `replay`, `scripted`, ...
    fn mode(&self) -> &'static str;
}

/// Validates the request and normalizes the provider stream so that exactly
/// one chunk has `done = true` and nothing follows it.
pub async fn complete_stream(
    provider: &dyn ChatProvider,
    req: &ChatRequest,
) -> Result<ChunkStream, LlmError> {
    req.validate()?;
    let inner = provider.stream(req).await?;
    let guarded = futures::stream::unfold((inner, false), |(mut inner, finished)| async move {
        if finished {
            return None;
        }
        match inner.next().await {
            Some(Ok(chunk)) => {
                let done = chunk.done;
                Some((Ok(chunk), (inner, done)))
            }
            Some(Err(e)) => Some((Err(e), (inner, true))),
            None => Some((Ok(StreamChunk::done()), (inner, true))),
        }
    });
    Ok(Box::pin(guarded))
}

/// Drains a stream into its chunks.
pub async fn collect_chunks(mut stream: ChunkStream) -> Result<Vec<StreamChunk>, LlmError> {
    let mut out = Vec::new();
    while let Some(chunk) = stream.next().await {
        out.push(chunk?);
    }
    Ok(out)
}

/// Full completion text of a request.
pub async fn complete_text(provider: &dyn ChatProvider, req: &ChatRequest) -> Result<String, LlmError> {
    let chunks = collect_chunks(complete_stream(provider, req).await?).await?;
    Ok(chunks.into_iter().map(|c| c.text).collect())
}

/// Stable SHA-256 content hash of a request: 64 lowercase hex characters.
///
/// Hashes a canonical JSON document with sorted keys, so field order in any
/// serialized form of the request does not matter.
pub fn fixture_key(req: &ChatRequest) -> String {
    let canonical = serde_json::json!({
        "tag": req.tag,
        "messages": req.messages,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    });
    // serde_json's default map is ordered by key.
    let bytes = serde_json::to_vec(&canonical).expect("request serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req() -> ChatRequest {
        ChatRequest::new(
            "legal_interpreter:r0",
            vec![ChatMessage::system("sys"), ChatMessage::user("body")],
        )
    }

    #[test]
    fn fixture_key_is_stable_and_field_sensitive() {
        let a = req();
        let b: ChatRequest = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(fixture_key(&a), fixture_key(&b));

        let mut c = a.clone();
        c.temperature = 0.3;
        assert_ne!(fixture_key(&a), fixture_key(&c));
        assert_eq!(fixture_key(&a).len(), 64);
    }

    #[test]
    fn fixture_key_ignores_json_field_order() {
        let shuffled = r#"{"tag":"legal_interpreter:r0","max_tokens":4096,"temperature":0.2,
            "messages":[{"content":"sys","role":"system"},{"content":"body","role":"user"}]}"#;
        let parsed: ChatRequest = serde_json::from_str(shuffled).unwrap();
        assert_eq!(fixture_key(&parsed), fixture_key(&req()));
    }

    #[test]
    fn validation_rules() {
        let empty = ChatRequest::new("t", vec![]);
        assert!(matches!(empty.validate(), Err(LlmError::InvalidRequest(_))));
        let no_system = ChatRequest::new("t", vec![ChatMessage::user("x")]);
        assert!(matches!(no_system.validate(), Err(LlmError::InvalidRequest(_))));
        assert!(req().validate().is_ok());
    }

    proptest::proptest! {
        #[test]
        fn fixture_key_is_64_hex(tag in ".{0,40}", body in ".{0,200}", temp in 0.0f64..2.0, max in 1u32..100_000) {
            let mut r = ChatRequest::new(tag, vec![ChatMessage::system("s"), ChatMessage::user(body)]);
            r.temperature = temp;
            r.max_tokens = max;
            let key = fixture_key(&r);
            proptest::prop_assert_eq!(key.len(), 64);
            proptest::prop_assert!(key.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        }
    }
}

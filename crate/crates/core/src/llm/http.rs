use std::time::Duration;

use async_trait::async_trait;
use futures::StreamExt;
use serde_json::Value;

use super::{ChatProvider, ChatRequest, ChunkStream, LlmError, StreamChunk, Usage};

pub const ENV_LLM_URL: &str = "ENGINE_LLM_URL";
pub const ENV_LLM_KEY: &str = "ENGINE_LLM_KEY";

/// Incremental decoder for `data:` lines of an OpenAI-style event stream.
#[derive(Debug, Default)]
pub struct SseLineDecoder {
    buf: String,
}

impl SseLineDecoder {
    /// Feeds raw bytes and returns the chunks completed by them.
    pub fn push(&mut self, bytes: &[u8]) -> Result<Vec<StreamChunk>, LlmError> {
        self.buf.push_str(&String::from_utf8_lossy(bytes));
        let mut out = Vec::new();
        while let Some(pos) = self.buf.find('\n') {
            let line: String = self.buf.drain(..=pos).collect();
            if let Some(chunk) = decode_line(line.trim_end_matches(['\r', '\n']))? {
                out.push(chunk);
            }
        }
        Ok(out)
    }

    /// Flushes a final unterminated line.
    pub fn finish(&mut self) -> Result<Option<StreamChunk>, LlmError> {
        let rest = std::mem::take(&mut self.buf);
        decode_line(rest.trim())
    }
}

fn decode_line(line: &str) -> Result<Option<StreamChunk>, LlmError> {
    let Some(data) = line.strip_prefix("data:") else {
        return Ok(None);
    };
    let data = data.trim();
    if data.is_empty() {
        return Ok(None);
    }
    if data == "[DONE]" {
        return Ok(Some(StreamChunk::done()));
    }
    let v: Value = serde_json::from_str(data).map_err(|e| LlmError::Protocol(e.to_string()))?;
    if let Some(err) = v.get("error") {
        return Err(LlmError::ProviderUnavailable(err.to_string()));
    }
    let text = v["choices"][0]["delta"]["content"].as_str().unwrap_or_default().to_string();
    let usage = v.get("usage").filter(|u| !u.is_null()).map(|u| Usage {
        prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0) as u32,
        completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0) as u32,
    });
    if text.is_empty() && usage.is_none() {
        return Ok(None);
    }
    Ok(Some(StreamChunk { text, done: false, usage }))
}

/// Live provider for OpenAI-compatible `/chat/completions` streaming endpoints.
pub struct HttpChatProvider {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl HttpChatProvider {
    pub fn new(base_url: &str, api_key: Option<String>, model: impl Into<String>) -> Self {
        let base = base_url.trim_end_matches('/');
        let endpoint = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        Self {
            client: reqwest::Client::builder()
                .connect_timeout(Duration::from_secs(10))
                .build()
                .expect("http client"),
            endpoint,
            api_key,
            model: model.into(),
        }
    }

    /// Reads `ENGINE_LLM_URL` and `ENGINE_LLM_KEY`.
    pub fn from_env(model: impl Into<String>) -> Result<Self, LlmError> {
        let url = std::env::var(ENV_LLM_URL)
            .map_err(|_| LlmError::ProviderUnavailable(format!("{ENV_LLM_URL} is not set")))?;
        Ok(Self::new(&url, std::env::var(ENV_LLM_KEY).ok(), model))
    }
}

#[async_trait]
impl ChatProvider for HttpChatProvider {
    async fn stream(&self, req: &ChatRequest) -> Result<ChunkStream, LlmError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "stream": true,
        });
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder
            .send()
            .await
            .map_err(|e| LlmError::ProviderUnavailable(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|s| s.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(LlmError::RateLimited { retry_after });
        }
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            let lower = text.to_lowercase();
            if status.is_client_error() && (lower.contains("context") || lower.contains("too long")) {
                return Err(LlmError::ContextOverflow);
            }
            return Err(LlmError::ProviderUnavailable(format!("HTTP {status}: {text}")));
        }
        let bytes = resp.bytes_stream();
        let stream = futures::stream::unfold(
            (bytes, SseLineDecoder::default(), std::collections::VecDeque::new(), false),
            |(mut bytes, mut decoder, mut pending, mut ended)| async move {
                loop {
                    if let Some(chunk) = pending.pop_front() {
                        return Some((Ok(chunk), (bytes, decoder, pending, ended)));
                    }
                    if ended {
                        return None;
                    }
                    match bytes.next().await {
                        Some(Ok(b)) => match decoder.push(&b) {
                            Ok(chunks) => pending.extend(chunks),
                            Err(e) => return Some((Err(e), (bytes, decoder, pending, true))),
                        },
                        Some(Err(e)) => {
                            let err = LlmError::ProviderUnavailable(e.to_string());
                            return Some((Err(err), (bytes, decoder, pending, true)));
                        }
                        None => {
                            ended = true;
                            match decoder.finish() {
                                Ok(Some(c)) => pending.push_back(c),
                                Ok(None) => {}
                                Err(e) => return Some((Err(e), (bytes, decoder, pending, true))),
                            }
                        }
                    }
                }
            },
        );
        Ok(Box::pin(stream))
    }

    fn mode(&self) -> &'static str {
        "live"
    }
}

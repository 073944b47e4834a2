use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;

use super::{ChatProvider, ChatRequest, ChunkStream, LlmError, StreamChunk};

/// Splits text into chunks of roughly `target` characters, breaking after
/// whitespace where possible. Concatenating the chunks yields `text`.
pub fn chunk_text(text: &str, target: usize) -> Vec<String> {
    let target = target.max(1);
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut count = 0usize;
    for ch in text.chars() {
        current.push(ch);
        count += 1;
        if count >= target && ch.is_whitespace() || count >= target * 2 {
            chunks.push(std::mem::take(&mut current));
            count = 0;
        }
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

enum Source {
    Dir(PathBuf),
    Map(BTreeMap<String, String>),
}

/// Deterministic stand-in for a model: answers each request with canned text
/// selected by its tag.
///
/// A tag `a:b:c` is looked up as `a.b.c`, then `a.b`, then `a` (as `.md`
/// files when directory-backed), so one script can serve several rounds.
pub struct ScriptedProvider {
    source: Source,
    chunk_chars: usize,
}

impl ScriptedProvider {
    pub fn from_dir(dir: impl Into<PathBuf>) -> Self {
        Self { source: Source::Dir(dir.into()), chunk_chars: 48 }
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let map = pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect();
        Self { source: Source::Map(map), chunk_chars: 48 }
    }

    pub fn with_chunk_chars(mut self, n: usize) -> Self {
        self.chunk_chars = n;
        self
    }

    fn lookup(&self, tag: &str) -> Result<Option<String>, LlmError> {
        let parts: Vec<&str> = tag.split(':').collect();
        for len in (1..=parts.len()).rev() {
            let name = parts[..len].join(".");
            let hit = match &self.source {
                Source::Map(map) => map.get(&name).cloned(),
                Source::Dir(dir) => {
                    let path = dir.join(format!("{name}.md"));
                    match std::fs::read_to_string(&path) {
                        Ok(text) => Some(text),
                        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
                        Err(e) => return Err(LlmError::Fixture(format!("{}: {e}", path.display()))),
                    }
                }
            };
            if hit.is_some() {
                return Ok(hit);
            }
        }
        Ok(None)
    }
}

#[async_trait]
impl ChatProvider for ScriptedProvider {
    async fn stream(&self, req: &ChatRequest) -> Result<ChunkStream, LlmError> {
        let text = self
            .lookup(&req.tag)?
            .ok_or_else(|| LlmError::ProviderUnavailable(format!("no script for tag {}", req.tag)))?;
        let mut chunks: Vec<Result<StreamChunk, LlmError>> = chunk_text(&text, self.chunk_chars)
            .into_iter()
            .map(|t| Ok(StreamChunk::text(t)))
            .collect();
        chunks.push(Ok(StreamChunk::done()));
        Ok(Box::pin(futures::stream::iter(chunks)))
    }

    fn mode(&self) -> &'static str {
        "scripted"
    }
}

/// Fails the first calls with queued errors, then delegates.
pub struct FlakyProvider {
    inner: Arc<dyn ChatProvider>,
    failures: Mutex<VecDeque<LlmError>>,
    calls: Mutex<usize>,
}

impl FlakyProvider {
    pub fn new(inner: Arc<dyn ChatProvider>, failures: impl IntoIterator<Item = LlmError>) -> Self {
        Self {
            inner,
            failures: Mutex::new(failures.into_iter().collect()),
            calls: Mutex::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().expect("calls lock")
    }
}

#[async_trait]
impl ChatProvider for FlakyProvider {
    async fn stream(&self, req: &ChatRequest) -> Result<ChunkStream, LlmError> {
        *self.calls.lock().expect("calls lock") += 1;
        let next = self.failures.lock().expect("failures lock").pop_front();
        match next {
            Some(err) => Err(err),
            None => self.inner.stream(req).await,
        }
    }

    fn mode(&self) -> &'static str {
        self.inner.mode()
    }
}

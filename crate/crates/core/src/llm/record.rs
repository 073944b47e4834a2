use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use futures::StreamExt;

use super::{fixture_key, write_fixture, ChatProvider, ChatRequest, ChunkStream, LlmError, StreamChunk};

/// Wraps an upstream provider and writes every completed stream to a fixture.
///
/// Chunks pass through unchanged while being captured; the fixture is written
/// once the upstream reports `done`. Streams that error are not recorded.
pub struct RecordingProvider {
    inner: Arc<dyn ChatProvider>,
    dir: PathBuf,
    recorded: Arc<Mutex<Vec<String>>>,
}

impl RecordingProvider {
    pub fn new(inner: Arc<dyn ChatProvider>, dir: impl Into<PathBuf>) -> Self {
        Self { inner, dir: dir.into(), recorded: Arc::default() }
    }

    /// Fixture keys written so far, in completion order.
    pub fn recorded_keys(&self) -> Vec<String> {
        self.recorded.lock().expect("recording lock").clone()
    }
}

#[async_trait]
impl ChatProvider for RecordingProvider {
    async fn stream(&self, req: &ChatRequest) -> Result<ChunkStream, LlmError> {
        let key = fixture_key(req);
        let upstream = self.inner.stream(req).await?;
        let dir = self.dir.clone();
        let recorded = self.recorded.clone();
        let mut captured: Vec<StreamChunk> = Vec::new();
        let mut written = false;
        let stream = upstream.map(move |item| {
            if let Ok(chunk) = &item {
                captured.push(chunk.clone());
                if chunk.done && !written {
                    written = true;
                    write_fixture(&dir, &key, &captured)?;
                    recorded.lock().expect("recording lock").push(key.clone());
                }
            }
            item
        });
        Ok(Box::pin(stream))
    }

    fn mode(&self) -> &'static str {
        "record"
    }
}

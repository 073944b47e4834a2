use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fixture_key, ChatProvider, ChatRequest, ChunkStream, LlmError, StreamChunk};
use crate::clock::Clock;

/// Simulated provider latency applied when replaying.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latency {
    pub first_chunk: Duration,
    pub per_chunk: Duration,
    /// Seeded random extra delay in `[0, jitter.1]` ms per chunk.
    pub jitter: Option<(u64, u64)>,
}

impl Latency {
    pub const ZERO: Latency = Latency {
        first_chunk: Duration::ZERO,
        per_chunk: Duration::ZERO,
        jitter: None,
    };

    pub fn with_jitter(mut self, seed: u64, max_ms: u64) -> Self {
        self.jitter = Some((seed, max_ms));
        self
    }
}

impl Default for Latency {
    fn default() -> Self {
        Latency {
            first_chunk: Duration::from_millis(120),
            per_chunk: Duration::from_millis(15),
            jitter: None,
        }
    }
}

fn fixture_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.jsonl"))
}

/// Reads a fixture: one JSON [`StreamChunk`] per line.
pub fn read_fixture(dir: &Path, key: &str) -> Result<Option<Vec<StreamChunk>>, LlmError> {
    let path = fixture_path(dir, key);
    let content = match fs::read_to_string(&path) {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(LlmError::Fixture(format!("{}: {e}", path.display()))),
    };
    content
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

pub fn write_fixture(dir: &Path, key: &str, chunks: &[StreamChunk]) -> Result<PathBuf, LlmError> {
    fs::create_dir_all(dir).map_err(|e| LlmError::Fixture(e.to_string()))?;
    let path = fixture_path(dir, key);
    let mut file = fs::File::create(&path).map_err(|e| LlmError::Fixture(e.to_string()))?;
    for chunk in chunks {
        let line = serde_json::to_string(chunk).map_err(|e| LlmError::Fixture(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| LlmError::Fixture(e.to_string()))?;
    }
    Ok(path)
}

/// Serves recorded chunk sequences, byte-identical to the recording.
///
/// Fixture files are read synchronously on purpose: blocking-pool IO would
/// let a paused tokio clock advance and break simulated-time determinism.
pub struct ReplayProvider {
    dir: PathBuf,
    clock: Arc<dyn Clock>,
    latency: Latency,
}

impl ReplayProvider {
    pub fn new(dir: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Self {
        Self { dir: dir.into(), clock, latency: Latency::default() }
    }

    pub fn with_latency(mut self, latency: Latency) -> Self {
        self.latency = latency;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn delays(&self, key: &str, n: usize) -> Vec<Duration> {
        let mut rng = self.latency.jitter.map(|(seed, max)| {
            // Jitter depends on the request, not on call order.
            let key_seed = u64::from_str_radix(&key[..16], 16).unwrap_or(0);
            (ChaCha8Rng::seed_from_u64(seed ^ key_seed), max)
        });
        (0..n)
            .map(|i| {
                let base = if i == 0 { self.latency.first_chunk } else { self.latency.per_chunk };
                let extra = rng
                    .as_mut()
                    .map(|(r, max)| Duration::from_millis(r.random_range(0..=*max)))
                    .unwrap_or_default();
                base + extra
            })
            .collect()
    }
}

#[async_trait]
impl ChatProvider for ReplayProvider {
    async fn stream(&self, req: &ChatRequest) -> Result<ChunkStream, LlmError> {
        let key = fixture_key(req);
        let chunks = read_fixture(&self.dir, &key)?
            .ok_or_else(|| LlmError::FixtureMissing { key: key.clone(), tag: req.tag.clone() })?;
        let delays = self.delays(&key, chunks.len());
        let clock = self.clock.clone();
        let items = chunks.into_iter().zip(delays);
        let stream = futures::stream::unfold(
            (items, clock),
            |(mut items, clock)| async move {
                let (chunk, delay) = items.next()?;
                if !delay.is_zero() {
                    clock.sleep(delay).await;
                }
                Some((Ok(chunk), (items, clock)))
            },
        );
        Ok(Box::pin(stream))
    }

    fn mode(&self) -> &'static str {
        "replay"
    }
}

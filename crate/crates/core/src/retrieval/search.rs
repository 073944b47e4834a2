use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SearchQuery, SearchResult, MAX_RESULTS_PER_QUERY};

pub const ENV_SEARCH_KEY: &str = "ENGINE_SEARCH_KEY";
pub const ENV_SEARCH_CX: &str = "ENGINE_SEARCH_CX";

const DEFAULT_ENDPOINT: &str = "https://www.googleapis.com/customsearch/v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("search provider unavailable: {0}")]
    SearchUnavailable(String),
    #[error("search quota exceeded")]
    SearchQuotaExceeded,
    #[error("no search fixture for query slug {0}")]
    FixtureMissing(String),
    #[error("malformed search response: {0}")]
    Malformed(String),
}

/// One entry of a provider response, before url validation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawItem {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub snippet: String,
    #[serde(default)]
    pub link: String,
}

/// Response document shape shared by the live endpoint and fixture files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    #[serde(default)]
    pub items: Vec<RawItem>,
}

#[async_trait]
pub trait SearchProvider: Send + Sync {
    async fn fetch(&self, q: &SearchQuery) -> Result<RawResponse, SearchError>;

    fn mode(&self) -> &'static str;
}

/// Runs `q` and keeps at most ten well-formed results in provider order.
pub async fn search(q: &SearchQuery, provider: &dyn SearchProvider) -> Result<Vec<SearchResult>, SearchError> {
    let raw = provider.fetch(q).await?;
    Ok(raw
        .items
        .into_iter()
        .filter_map(|i| SearchResult::new(i.title, i.snippet, i.link))
        .take(MAX_RESULTS_PER_QUERY)
        .collect())
}

/// Fixture file stem for a query: case-folded tokens joined by `-`.
pub fn normalize_query(text: &str) -> String {
    crate::text::tokens(text).join("-")
}

/// Serves canned responses from `<dir>/<normalized query>.json`.
pub struct FixtureSearchProvider {
    dir: PathBuf,
}

impl FixtureSearchProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, text: &str) -> PathBuf {
        self.dir.join(format!("{}.json", normalize_query(text)))
    }
}

#[async_trait]
impl SearchProvider for FixtureSearchProvider {
    async fn fetch(&self, q: &SearchQuery) -> Result<RawResponse, SearchError> {
        let path = self.path_for(&q.text);
        let text = std::fs::read_to_string(&path)
            .map_err(|_| SearchError::FixtureMissing(normalize_query(&q.text)))?;
        serde_json::from_str(&text).map_err(|e| SearchError::Malformed(format!("{}: {e}", path.display())))
    }

    fn mode(&self) -> &'static str {
        "fixture"
    }
}

/// Writes every successful response of `inner` as a fixture file.
pub struct RecordingSearchProvider<P> {
    inner: P,
    dir: PathBuf,
    recorded: Mutex<Vec<PathBuf>>,
}

impl<P: SearchProvider> RecordingSearchProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        Self { inner, dir: dir.into(), recorded: Mutex::new(Vec::new()) }
    }

    pub fn recorded(&self) -> Vec<PathBuf> {
        self.recorded.lock().expect("recorded lock").clone()
    }
}

#[async_trait]
impl<P: SearchProvider> SearchProvider for RecordingSearchProvider<P> {
    async fn fetch(&self, q: &SearchQuery) -> Result<RawResponse, SearchError> {
        let resp = self.inner.fetch(q).await?;
        let path = self.dir.join(format!("{}.json", normalize_query(&q.text)));
        write_json(&path, &resp).map_err(|e| SearchError::Malformed(e.to_string()))?;
        self.recorded.lock().expect("recorded lock").push(path);
        Ok(resp)
    }

    fn mode(&self) -> &'static str {
        "record"
    }
}

fn write_json(path: &Path, resp: &RawResponse) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(resp)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Live custom-search client (`GET endpoint?key=..&cx=..&q=..`).
pub struct HttpSearchProvider {
    client: reqwest::Client,
    endpoint: String,
    key: String,
    cx: String,
}

impl HttpSearchProvider {
    pub fn new(
        endpoint: Option<String>,
        key: impl Into<String>,
        cx: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, SearchError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SearchError::SearchUnavailable(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            key: key.into(),
            cx: cx.into(),
        })
    }

    pub fn from_env(endpoint: Option<String>, timeout: Duration) -> Result<Self, SearchError> {
        let key = std::env::var(ENV_SEARCH_KEY)
            .map_err(|_| SearchError::SearchUnavailable(format!("{ENV_SEARCH_KEY} is not set")))?;
        let cx = std::env::var(ENV_SEARCH_CX)
            .map_err(|_| SearchError::SearchUnavailable(format!("{ENV_SEARCH_CX} is not set")))?;
        Self::new(endpoint, key, cx, timeout)
    }
}

#[async_trait]
impl SearchProvider for HttpSearchProvider {
    async fn fetch(&self, q: &SearchQuery) -> Result<RawResponse, SearchError> {
        let num = MAX_RESULTS_PER_QUERY.to_string();
        let mut url = url::Url::parse(&self.endpoint).map_err(|e| SearchError::SearchUnavailable(e.to_string()))?;
        url.query_pairs_mut()
            .append_pair("key", &self.key)
            .append_pair("cx", &self.cx)
            .append_pair("q", &q.text)
            .append_pair("num", &num);
        let resp = self
            .client
            .get(url)
            .send()
            .await
            .map_err(|e| SearchError::SearchUnavailable(e.to_string()))?;
        let status = resp.status();
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            return Err(SearchError::SearchQuotaExceeded);
        }
        if !status.is_success() {
            return Err(SearchError::SearchUnavailable(format!("status {status}")));
        }
        let body = resp.text().await.map_err(|e| SearchError::SearchUnavailable(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| SearchError::Malformed(e.to_string()))
    }

    fn mode(&self) -> &'static str {
        "live"
    }
}

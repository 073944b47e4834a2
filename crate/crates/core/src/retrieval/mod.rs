//! Search-backed precedent retrieval for the precedent researcher.
//!
//! The pipeline is: [`expand_keywords`] (one LLM call) → [`search`] per query
//! → [`score_source`] → [`filter_merge`] → [`SearchDigest`], which is rendered
//! into the researcher's prompt.

mod authority;
mod keywords;
mod search;

pub use authority::{registrable_domain, AuthorityTable, DEFAULT_AUTHORITY};
pub use keywords::{expand_keywords, risk_flags, KEYWORDS_PROMPT};
pub use search::{
    normalize_query, search, FixtureSearchProvider, HttpSearchProvider, RawItem, RawResponse,
    RecordingSearchProvider, SearchError, SearchProvider, ENV_SEARCH_CX, ENV_SEARCH_KEY,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{ChatProvider, LlmError};
use crate::text::{jaccard, token_set};

pub const MAX_QUERY_CHARS: usize = 256;
pub const MAX_RESULTS_PER_QUERY: usize = 10;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("scenario is empty")]
    EmptyScenario,
    #[error("invalid retrieval configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrigin {
    ScenarioExpansion,
    RiskFlag,
    Recheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    pub origin: QueryOrigin,
    pub round: u32,
}

impl SearchQuery {
    pub fn new(text: impl Into<String>, origin: QueryOrigin, round: u32) -> Result<Self, RetrievalError> {
        let text = text.into().trim().to_string();
        if text.is_empty() {
            return Err(RetrievalError::InvalidQuery("query text is empty".into()));
        }
        if text.chars().count() > MAX_QUERY_CHARS {
            return Err(RetrievalError::InvalidQuery(format!(
                "query longer than {MAX_QUERY_CHARS} characters"
            )));
        }
        Ok(Self { text, origin, round })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub snippet: String,
    pub url: String,
    pub source_domain: String,
}

impl SearchResult {
    /// `None` when `url` is not an absolute http(s) url with a host name.
    pub fn new(title: impl Into<String>, snippet: impl Into<String>, url: impl Into<String>) -> Option<Self> {
        let url = url.into();
        let source_domain = registrable_domain(&url)?;
        Some(Self { title: title.into(), snippet: snippet.into(), url, source_domain })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSource {
    pub result: SearchResult,
    pub similarity: f64,
    pub authority: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub similarity: f64,
    pub authority: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { similarity: 0.7, authority: 0.3 }
    }
}

impl ScoreWeights {
    pub fn new(similarity: f64, authority: f64) -> Result<Self, RetrievalError> {
        let w = Self { similarity, authority };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.similarity < 0.0 || self.authority < 0.0 {
            return Err(RetrievalError::Config("weights must be non-negative".into()));
        }
        if (self.similarity + self.authority - 1.0).abs() > 1e-9 {
            return Err(RetrievalError::Config("weights must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub weights: ScoreWeights,
    pub threshold: f64,
    pub cap: usize,
    pub max_queries: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { weights: ScoreWeights::default(), threshold: 0.35, cap: 8, max_queries: 6 }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        self.weights.validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(RetrievalError::Config("threshold must be in [0, 1]".into()));
        }
        if self.cap == 0 || self.max_queries == 0 {
            return Err(RetrievalError::Config("cap and max_queries must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn score_source(
    r: &SearchResult,
    q: &SearchQuery,
    table: &AuthorityTable,
    weights: ScoreWeights,
) -> ScoredSource {
    let doc = format!("{} {}", r.title, r.snippet);
    let similarity = jaccard(&token_set(&q.text), &token_set(&doc));
    let authority = table.lookup(&r.source_domain);
    let score = (weights.similarity * similarity + weights.authority * authority).clamp(0.0, 1.0);
    ScoredSource { result: r.clone(), similarity, authority, score }
}

/// Keeps the best-scoring entry per url, drops scores below `threshold`, and
/// returns at most `cap` entries ordered by score descending, then url.
pub fn filter_merge(scored: Vec<ScoredSource>, threshold: f64, cap: usize) -> Vec<ScoredSource> {
    let mut best: BTreeMap<String, ScoredSource> = BTreeMap::new();
    for s in scored {
        match best.get(&s.result.url) {
            Some(prev) if prev.score >= s.score => {}
            _ => {
                best.insert(s.result.url.clone(), s);
            }
        }
    }
    let mut out: Vec<ScoredSource> = best.into_values().filter(|s| s.score >= threshold).collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.result.url.cmp(&b.result.url)));
    out.truncate(cap);
    out
}

/// Ranked evidence handed to the precedent researcher.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDigest {
    pub queries: Vec<SearchQuery>,
    pub sources: Vec<ScoredSource>,
    pub notes: Vec<String>,
}

impl SearchDigest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("Search queries:\n");
        for q in &self.queries {
            let _ = writeln!(out, "- {}", q.text);
        }
        out.push_str("\nRanked sources:\n");
        if self.sources.is_empty() {
            out.push_str("(no source passed the relevance threshold)\n");
        }
        for (i, s) in self.sources.iter().enumerate() {
            let _ = writeln!(
                out,
                "[S{}] {} | {} | score {:.2} (similarity {:.2}, authority {:.2})\n     {}",
                i + 1,
                s.result.title,
                s.result.url,
                s.score,
                s.similarity,
                s.authority,
                s.result.snippet
            );
        }
        out
    }
}

/// Expands keywords, runs every query and merges the scored results.
///
/// Individual search failures are recorded in `notes`; only a failed keyword
/// expansion aborts the digest.
pub async fn build_digest(
    scenario: &str,
    flags: &[String],
    round: u32,
    llm: &dyn ChatProvider,
    provider: &dyn SearchProvider,
    table: &AuthorityTable,
    config: &RetrievalConfig,
) -> Result<SearchDigest, RetrievalError> {
    let queries = expand_keywords(scenario, flags, round, config.max_queries, llm).await?;
    let results =
        futures::future::join_all(queries.iter().map(|q| search(q, provider))).await;
    let mut scored = Vec::new();
    let mut notes = Vec::new();
    for (q, res) in queries.iter().zip(results) {
        match res {
            Ok(items) => scored.extend(items.iter().map(|r| score_source(r, q, table, config.weights))),
            Err(e) => notes.push(format!("search for \"{}\" failed: {e}", q.text)),
        }
    }
    let sources = filter_merge(scored, config.threshold, config.cap);
    Ok(SearchDigest { queries, sources, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(title: &str, snippet: &str, url: &str) -> SearchResult {
        SearchResult::new(title, snippet, url).unwrap()
    }

    fn scored(url: &str, score: f64) -> ScoredSource {
        ScoredSource { result: result("t", "s", url), similarity: score, authority: score, score }
    }

    #[test]
    fn worked_score_example() {
        let q = SearchQuery::new("facial recognition lawsuit", QueryOrigin::RiskFlag, 0).unwrap();
        let r = result("Facial recognition settlement", "lawsuit beauty", "https://www.ftc.gov/x");
        let s = score_source(&r, &q, &AuthorityTable::shipped(), ScoreWeights::default());
        assert!((s.similarity - 0.6).abs() < 1e-12);
        assert_eq!(s.authority, 0.9);
        assert!((s.score - 0.69).abs() < 1e-12);
    }

    #[test]
    fn score_bounds() {
        let table = AuthorityTable::shipped();
        let q = SearchQuery::new("alpha beta", QueryOrigin::ScenarioExpansion, 0).unwrap();
        let r = result("alpha", "beta", "https://unknown-site.example/a");
        let mut t = table.clone();
        t.domains.insert("unknown-site.example".into(), 1.0);
        assert_eq!(score_source(&r, &q, &t, ScoreWeights::default()).score, 1.0);
        let r = result("gamma", "delta", "https://unknown-site.example/a");
        let s = score_source(&r, &q, &table, ScoreWeights::default());
        assert!((s.score - 0.09).abs() < 1e-12);
    }

    #[test]
    fn threshold_and_dedup() {
        let out = filter_merge(
            vec![scored("https://a.com/1", 0.9), scored("https://a.com/2", 0.4), scored("https://a.com/3", 0.2)],
            0.35,
            8,
        );
        let scores: Vec<f64> = out.iter().map(|s| s.score).collect();
        assert_eq!(scores, vec![0.9, 0.4]);

        let out = filter_merge(vec![scored("https://a.com/1", 0.5), scored("https://a.com/1", 0.7)], 0.35, 8);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.7);
    }

    #[test]
    fn query_validation() {
        assert!(SearchQuery::new("  ", QueryOrigin::Recheck, 0).is_err());
        assert!(SearchQuery::new("x".repeat(257), QueryOrigin::Recheck, 0).is_err());
        assert!(SearchQuery::new("x".repeat(256), QueryOrigin::Recheck, 0).is_ok());
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(ScoreWeights::new(0.5, 0.6).is_err());
        assert!(ScoreWeights::new(-0.1, 1.1).is_err());
        assert!(ScoreWeights::new(0.25, 0.75).is_ok());
    }
}

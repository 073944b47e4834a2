#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use roundtable_core::SimulatedClock;
use roundtable_server::api::{self, AppState};
use roundtable_server::build_state;
use roundtable_server::config::{ProviderMode, SearchMode, ServiceConfig};

pub fn scenario_dir(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/scenarios")).join(name)
}

/// Replay configuration for one scenario with the audit store at `store`.
pub fn replay_config(scenario: &str, store: &Path) -> ServiceConfig {
    let dir = scenario_dir(scenario);
    let mut cfg = ServiceConfig { store: store.to_path_buf(), ..ServiceConfig::default() };
    cfg.provider.mode = ProviderMode::Replay;
    cfg.provider.fixtures = dir.join("llm");
    cfg.search.mode = SearchMode::Fixture;
    cfg.search.fixtures = dir.join("search");
    cfg
}

pub fn app(cfg: &ServiceConfig) -> (Arc<AppState>, Router) {
    let state = build_state(cfg, Arc::new(SimulatedClock::new())).unwrap();
    (state.clone(), api::router(state))
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<serde_json::Value>, headers: &[(&str, &str)]) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, body }
}

pub fn tryon_request() -> serde_json::Value {
    let text = std::fs::read_to_string(scenario_dir("tryon").join("proposal.txt")).unwrap();
    let p = roundtable_core::Proposal::from_text("tryon", &text);
    serde_json::json!({ "proposal": { "id": p.id, "title": p.title, "body": p.body, "jurisdiction_tags": p.jurisdiction_tags } })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: Option<String>,
    pub event: Option<String>,
    pub data: String,
}

/// Splits an SSE body into frames, skipping keep-alive comments.
pub fn parse_sse(body: &[u8]) -> Vec<Frame> {
    let text = String::from_utf8(body.to_vec()).unwrap();
    text.split("\n\n")
        .filter_map(|block| {
            let mut f = Frame { id: None, event: None, data: String::new() };
            let mut any = false;
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id:") {
                    f.id = Some(v.trim().to_string());
                    any = true;
                } else if let Some(v) = line.strip_prefix("event:") {
                    f.event = Some(v.trim().to_string());
                    any = true;
                } else if let Some(v) = line.strip_prefix("data:") {
                    f.data.push_str(v.strip_prefix(' ').unwrap_or(v));
                    any = true;
                }
            }
            any.then_some(f)
        })
        .collect()
}

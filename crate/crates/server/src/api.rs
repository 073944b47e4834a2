//! HTTP routes and the server-push event stream.
//!
//! Every SSE frame carries `id: <seq>`, `event: <payload kind>` and one line
//! of JSON holding the full [`SessionEvent`]. A client reconnecting with
//! `Last-Event-ID: k` receives seq `k+1` onwards.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use roundtable_core::orchestrator::{Engine, EngineError, SessionError};
use roundtable_core::{validate_proposal, Attachment, Proposal, SessionEvent, SessionId};

use crate::cases::CaseLibraryEntry;
use crate::store::AuditStore;

pub const LAST_EVENT_ID: &str = "last-event-id";

pub struct AppState {
    pub engine: Arc<Engine>,
    pub store: Option<Arc<AuditStore>>,
    pub cases: Vec<CaseLibraryEntry>,
    pub provider_mode: &'static str,
    pub max_proposal_bytes: usize,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_view).delete(close_session))
        .route("/v1/sessions/{id}/events", get(events))
        .route("/v1/sessions/{id}/questions", post(ask))
        .route("/v1/sessions/{id}/report", get(report))
        .route("/v1/cases", get(cases))
        .route("/v1/rulebook", get(rulebook))
        .route("/v1/healthz", get(healthz))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn unknown_session(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("unknown session {id}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProposalInput {
    #[serde(default)]
    id: Option<String>,
    title: String,
    body: String,
    #[serde(default)]
    attachments: Vec<Attachment>,
    #[serde(default)]
    jurisdiction_tags: Vec<String>,
}

/// Stable id for proposals submitted without one.
fn content_id(title: &str, body: &str) -> String {
    let digest = Sha256::digest(format!("{title}\n{body}").as_bytes());
    format!("p-{}", &hex::encode(digest)[..12])
}

#[derive(Deserialize)]
struct CreateSession {
    proposal: ProposalInput,
}

async fn create_session(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: CreateSession = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    let input = req.proposal;
    let id = input.id.unwrap_or_else(|| content_id(&input.title, &input.body));
    let mut proposal = Proposal::new(id, input.title, input.body);
    proposal.attachments = input.attachments;
    proposal.jurisdiction_tags = input.jurisdiction_tags;
    proposal.submitted_at = st.engine.deps().clock.wall_now();
    let validated = match validate_proposal(proposal, st.max_proposal_bytes) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    match st.engine.start_session(validated) {
        Ok(handle) => (StatusCode::CREATED, Json(json!({ "session_id": handle.id() }))).into_response(),
        Err(e @ EngineError::CapacityExceeded(_)) => error(StatusCode::TOO_MANY_REQUESTS, e.to_string()),
        Err(e) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

async fn session_view(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match st.engine.session(&SessionId(id.clone())) {
        Some(h) => Json(h.view()).into_response(),
        None => unknown_session(&id),
    }
}

async fn close_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match st.engine.session(&SessionId(id.clone())) {
        Some(h) => {
            h.close();
            StatusCode::NO_CONTENT.into_response()
        }
        None => unknown_session(&id),
    }
}

/// Parses `Last-Event-ID`; anything unparsable means "from the start".
pub fn resume_point(headers: &HeaderMap) -> Option<u64> {
    headers.get(LAST_EVENT_ID)?.to_str().ok()?.trim().parse().ok()
}

pub fn sse_event(e: &SessionEvent) -> Event {
    Event::default()
        .id(e.seq.to_string())
        .event(e.payload.kind())
        .data(serde_json::to_string(e).expect("events serialize"))
}

async fn events(State(st): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    let Some(handle) = st.engine.session(&SessionId(id.clone())) else {
        return unknown_session(&id);
    };
    let stream = handle.log().subscribe(resume_point(&headers));
    sse_response(stream).into_response()
}

pub fn sse_response(
    stream: impl Stream<Item = SessionEvent> + Send + 'static,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    Sse::new(stream.map(|e| Ok(sse_event(&e)))).keep_alive(KeepAlive::default())
}

#[derive(Deserialize)]
struct AskBody {
    text: String,
}

async fn ask(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Response {
    let Some(handle) = st.engine.session(&SessionId(id.clone())) else {
        return unknown_session(&id);
    };
    let req: AskBody = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    match handle.ask(&req.text).await {
        Ok(qid) => (StatusCode::ACCEPTED, Json(json!({ "question_id": qid }))).into_response(),
        Err(e @ SessionError::EmptyQuestion) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e @ SessionError::SessionClosed) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

async fn report(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let sid = SessionId(id);
    let live = st.engine.session(&sid).map(|h| h.view());
    if let Some(report) = live.as_ref().and_then(|v| v.report.clone()) {
        return Json(report).into_response();
    }
    if let Some(report) = st.store.as_ref().and_then(|s| s.latest_report(&sid)) {
        return Json(report).into_response();
    }
    let state = live.map(|v| json!(v.state)).unwrap_or(serde_json::Value::Null);
    (StatusCode::NOT_FOUND, Json(json!({ "state": state }))).into_response()
}

async fn cases(State(st): State<Arc<AppState>>) -> Response {
    Json(&st.cases).into_response()
}

async fn rulebook(State(st): State<Arc<AppState>>) -> Response {
    Json(&*st.engine.deps().rulebook).into_response()
}

async fn healthz(State(st): State<Arc<AppState>>) -> Response {
    let audit = match &st.store {
        Some(s) if s.is_writable() => "ok",
        Some(_) => "unavailable",
        None => "disabled",
    };
    Json(json!({
        "status": "ok",
        "provider_mode": st.provider_mode,
        "audit": audit,
        "active_sessions": st.engine.active(),
    }))
    .into_response()
}

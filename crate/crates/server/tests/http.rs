//! HTTP contract of the service against replayed scenario streams.

mod common;

use std::time::Duration;

use axum::http::StatusCode;
use serde_json::json;

use common::*;
use roundtable_core::SessionId;

async fn wait_for_report(state: &roundtable_server::api::AppState, id: &str) {
    let h = state.engine.session(&SessionId::from(id)).unwrap();
    h.settled().await;
}

#[tokio::test(start_paused = true)]
async fn session_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(&replay_config("tryon", &dir.path().join("audit.jsonl")));

    let r = call(&app, "POST", "/v1/sessions", Some(tryon_request()), &[]).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["session_id"], "s1");

    let r = call(&app, "GET", "/v1/sessions/s1/report", None, &[]).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert!(matches!(r.json()["state"].as_str(), Some("created" | "analyzing")));

    wait_for_report(&state, "s1").await;
    let r = call(&app, "GET", "/v1/sessions/s1/report", None, &[]).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["overall_risk"], "high");

    let r = call(&app, "POST", "/v1/sessions/s1/questions", Some(json!({"text": "Does PIPL Article 26 apply here?"})), &[]).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    assert_eq!(r.json()["question_id"], "q1");
    let r = call(&app, "POST", "/v1/sessions/s1/questions", Some(json!({"text": "  "})), &[]).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    tokio::time::sleep(Duration::from_secs(5)).await;
    assert_eq!(call(&app, "DELETE", "/v1/sessions/s1", None, &[]).await.status, StatusCode::NO_CONTENT);
    tokio::time::sleep(Duration::from_millis(10)).await;
    let r = call(&app, "POST", "/v1/sessions/s1/questions", Some(json!({"text": "And GDPR?"})), &[]).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let r = call(&app, "GET", "/v1/sessions/s1/events", None, &[]).await;
    assert_eq!(r.status, StatusCode::OK);
    let frames = parse_sse(&r.body);
    assert_eq!(frames[0].event.as_deref(), Some("session_started"));
    for (i, f) in frames.iter().enumerate() {
        assert_eq!(f.id.as_deref(), Some(i.to_string().as_str()));
        let v: serde_json::Value = serde_json::from_str(&f.data).unwrap();
        assert_eq!(v["seq"], i as u64);
        assert_eq!(v["payload"]["kind"].as_str(), f.event.as_deref());
    }
    assert!(frames.iter().any(|f| f.event.as_deref() == Some("answer_ready")));

    assert_eq!(call(&app, "GET", "/v1/sessions/s9/events", None, &[]).await.status, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "POST", "/v1/sessions/s9/questions", Some(json!({"text": "x"})), &[]).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(start_paused = true)]
async fn event_stream_resumes_after_last_event_id() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(&replay_config("tryon", &dir.path().join("audit.jsonl")));
    call(&app, "POST", "/v1/sessions", Some(tryon_request()), &[]).await;
    wait_for_report(&state, "s1").await;
    call(&app, "DELETE", "/v1/sessions/s1", None, &[]).await;
    tokio::time::sleep(Duration::from_millis(10)).await;
    let r = call(&app, "GET", "/v1/sessions/s1/events", None, &[("Last-Event-ID", "7")]).await;
    let frames = parse_sse(&r.body);
    assert_eq!(frames[0].id.as_deref(), Some("8"));
    let full = parse_sse(&call(&app, "GET", "/v1/sessions/s1/events", None, &[]).await.body);
    assert_eq!(frames, full[8..].to_vec());
}

#[tokio::test(start_paused = true)]
async fn validation_and_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = replay_config("tryon", &dir.path().join("audit.jsonl"));
    cfg.engine.capacity = 1;
    let (_, app) = app(&cfg);
    let empty = json!({"proposal": {"title": "x", "body": "   "}});
    assert_eq!(call(&app, "POST", "/v1/sessions", Some(empty), &[]).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", "/v1/sessions", Some(json!({"nope": 1})), &[]).await.status, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", "/v1/sessions", Some(tryon_request()), &[]).await.status, StatusCode::CREATED);
    let r = call(&app, "POST", "/v1/sessions", Some(tryon_request()), &[]).await;
    assert_eq!(r.status, StatusCode::TOO_MANY_REQUESTS);
}

#[tokio::test(start_paused = true)]
async fn reports_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = replay_config("tryon", &dir.path().join("audit.jsonl"));
    {
        let (state, app) = app(&cfg);
        call(&app, "POST", "/v1/sessions", Some(tryon_request()), &[]).await;
        wait_for_report(&state, "s1").await;
    }
    let (_, app) = app(&cfg);
    let r = call(&app, "GET", "/v1/sessions/s1/report", None, &[]).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["session_id"], "s1");
    let r = call(&app, "POST", "/v1/sessions", Some(tryon_request()), &[]).await;
    assert_eq!(r.json()["session_id"], "s2");
    let r = call(&app, "GET", "/v1/sessions/s7/report", None, &[]).await;
    assert_eq!((r.status, r.json()["state"].clone()), (StatusCode::NOT_FOUND, serde_json::Value::Null));
}

#[tokio::test(start_paused = true)]
async fn read_only_store_degrades() {
    let dir = tempfile::tempdir().unwrap();
    // A directory cannot be opened as the audit file.
    let (state, app) = app(&replay_config("tryon", dir.path()));
    assert_eq!(call(&app, "GET", "/v1/healthz", None, &[]).await.json()["audit"], "unavailable");
    call(&app, "POST", "/v1/sessions", Some(tryon_request()), &[]).await;
    wait_for_report(&state, "s1").await;
    let r = call(&app, "GET", "/v1/sessions/s1", None, &[]).await;
    assert_eq!(r.json()["degraded"], true);
    assert_eq!(call(&app, "GET", "/v1/sessions/s1/report", None, &[]).await.status, StatusCode::OK);
}

#[tokio::test]
async fn reference_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(&replay_config("tryon", &dir.path().join("audit.jsonl")));
    let cases = call(&app, "GET", "/v1/cases", None, &[]).await.json();
    assert_eq!(cases.as_array().unwrap().len(), 8);
    let rb = call(&app, "GET", "/v1/rulebook", None, &[]).await.json();
    assert_eq!(rb["version"], "2025-01-01.1");
    assert!(rb["entries"].as_array().unwrap().iter().any(|e| e["locator"] == "GenAI Interim Measures Article 4"));
    let h = call(&app, "GET", "/v1/healthz", None, &[]).await.json();
    assert_eq!((h["status"].as_str(), h["provider_mode"].as_str()), (Some("ok"), Some("replay")));
}

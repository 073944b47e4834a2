//! Live chat and search clients against a local stand-in server.

use std::time::Duration;

use axum::http::{HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;

use roundtable_core::llm::{collect_chunks, complete_stream, ChatMessage, ChatRequest, HttpChatProvider, LlmError};
use roundtable_core::retrieval::{search, HttpSearchProvider, QueryOrigin, SearchError, SearchQuery};

async fn serve(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn request() -> ChatRequest {
    ChatRequest::new("legal_interpreter:r0", vec![ChatMessage::system("s"), ChatMessage::user("u")])
}

async fn chat_stream() -> impl IntoResponse {
    let body = concat!(
        ": keep-alive\n",
        "data: {\"choices\":[{\"delta\":{\"role\":\"assistant\"}}]}\n\n",
        "data: {\"choices\":[{\"delta\":{\"content\":\"### 1. Overall\"}}]}\n\n",
        "data: {\"choices\":[{\"delta\":{\"content\":\" Risk\"}}],\"usage\":{\"prompt_tokens\":7,\"completion_tokens\":2}}\n\n",
        "data: [DONE]\n\n",
    );
    ([("content-type", "text/event-stream")], body)
}

#[tokio::test(flavor = "multi_thread")]
async fn chat_client_streams_and_maps_errors() {
    let app = Router::new()
        .route("/ok/chat/completions", post(chat_stream))
        .route("/busy/chat/completions", post(|| async { (StatusCode::TOO_MANY_REQUESTS, [("retry-after", "3")], "") }))
        .route("/long/chat/completions", post(|| async { (StatusCode::BAD_REQUEST, "maximum context length exceeded") }))
        .route("/down/chat/completions", post(|| async { StatusCode::BAD_GATEWAY }));
    let base = serve(app).await;

    let ok = HttpChatProvider::new(&format!("{base}/ok"), Some("k".into()), "m");
    let chunks = collect_chunks(complete_stream(&ok, &request()).await.unwrap()).await.unwrap();
    let text: String = chunks.iter().map(|c| c.text.as_str()).collect();
    assert_eq!(text, "### 1. Overall Risk");
    assert_eq!(chunks.iter().filter(|c| c.done).count(), 1);
    assert!(chunks.last().unwrap().done);

    let err = |name: &str| HttpChatProvider::new(&format!("{base}/{name}"), None, "m");
    let busy = complete_stream(&err("busy"), &request()).await.err().unwrap();
    assert_eq!(busy, LlmError::RateLimited { retry_after: Some(Duration::from_secs(3)) });
    assert_eq!(complete_stream(&err("long"), &request()).await.err().unwrap(), LlmError::ContextOverflow);
    assert!(matches!(
        complete_stream(&err("down"), &request()).await.err().unwrap(),
        LlmError::ProviderUnavailable(_)
    ));
}

async fn results(headers: HeaderMap, q: axum::extract::RawQuery) -> impl IntoResponse {
    let q = q.0.unwrap_or_default();
    assert!(q.contains("key=k") && q.contains("cx=c") && q.contains("q=biometric+consent"), "{q}");
    assert!(headers.get("authorization").is_none());
    let body = r#"{"items":[{"title":"FTC order","snippet":"biometric consent","link":"https://www.ftc.gov/a"},
                   {"title":"bad","snippet":"x","link":"ftp://nope"}]}"#;
    ([("content-type", "application/json")], body)
}

#[tokio::test(flavor = "multi_thread")]
async fn search_client_maps_status_and_timeouts() {
    let app = Router::new()
        .route("/ok", get(results))
        .route("/quota", get(|| async { StatusCode::TOO_MANY_REQUESTS }))
        .route("/down", get(|| async { StatusCode::SERVICE_UNAVAILABLE }))
        .route("/garbage", get(|| async { "<html>" }))
        .route(
            "/slow",
            get(|| async {
                tokio::time::sleep(Duration::from_secs(5)).await;
                "{}"
            }),
        );
    let base = serve(app).await;
    let q = SearchQuery::new("biometric consent", QueryOrigin::RiskFlag, 0).unwrap();
    let client = |path: &str| {
        HttpSearchProvider::new(Some(format!("{base}/{path}")), "k", "c", Duration::from_millis(300)).unwrap()
    };

    let found = search(&q, &client("ok")).await.unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].source_domain, "ftc.gov");
    assert_eq!(search(&q, &client("quota")).await, Err(SearchError::SearchQuotaExceeded));
    assert!(matches!(search(&q, &client("down")).await, Err(SearchError::SearchUnavailable(_))));
    assert!(matches!(search(&q, &client("garbage")).await, Err(SearchError::Malformed(_))));
    assert!(matches!(search(&q, &client("slow")).await, Err(SearchError::SearchUnavailable(_))));
}

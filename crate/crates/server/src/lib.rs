//! Service facade for the roundtable review engine: configuration, the
//! durable audit store, HTTP and server-push routes, headless review output
//! and fixture recording.

pub mod api;
pub mod cases;
pub mod config;
pub mod fixtures;
pub mod review;
pub mod store;

use std::sync::Arc;

use thiserror::Error;

use roundtable_core::orchestrator::{AuditSink, Engine};
use roundtable_core::{Clock, SessionId};

use api::AppState;
use config::{ConfigError, ServiceConfig};
use store::{AuditStore, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Opens the audit store, builds the engine and returns the shared route state.
///
/// Session ids continue after the highest `sN` already in the store, so ids
/// stay unique across restarts.
pub fn build_state(cfg: &ServiceConfig, clock: Arc<dyn Clock>) -> Result<Arc<AppState>, ServiceError> {
    let store = Arc::new(AuditStore::open(&cfg.store)?);
    if let Some(why) = (!store.is_writable()).then(|| store.path().display().to_string()) {
        tracing::warn!(store = %why, "audit store is not writable; sessions will run degraded");
    }
    let deps = cfg.agent_deps(clock)?;
    let mut next = store.max_session_number();
    let audit: Arc<dyn AuditSink> = store.clone();
    let engine = Engine::new(deps, Arc::new(cfg.routing_table()?), audit, cfg.engine).with_id_source(move || {
        next += 1;
        SessionId(format!("s{next}"))
    });
    Ok(Arc::new(AppState {
        engine: Arc::new(engine),
        store: Some(store),
        cases: cases::shipped_cases(),
        provider_mode: cfg.provider.mode.as_str(),
        max_proposal_bytes: cfg.max_proposal_bytes,
    }))
}

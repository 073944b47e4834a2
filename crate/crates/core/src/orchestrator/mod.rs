//! Session lifecycle: staggered activation, dependency-gated planning, one
//! focused recheck round, consolidation and additive question rounds.

mod audit;
mod log;
mod session;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

pub use audit::{AuditEntry, AuditError, AuditKind, AuditSink, MemoryAudit, NoAudit, UnavailableAudit};
pub use log::{EventLog, LogError};
pub use session::{Answer, SessionError, SessionHandle, SessionState, SessionView};

use crate::agents::AgentDeps;
use crate::domain::{SessionId, ValidatedProposal};
use crate::router::RoutingTable;
use session::{Coordinator, Settings};

pub const DEFAULT_CAPACITY: usize = 16;
pub const DEFAULT_STAGGER: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Sessions allowed to analyze at the same time.
    pub capacity: usize,
    #[serde(with = "millis")]
    pub stagger: Duration,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { capacity: DEFAULT_CAPACITY, stagger: DEFAULT_STAGGER }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("engine is at capacity ({0} concurrent sessions)")]
    CapacityExceeded(usize),
    #[error("session {0} already exists")]
    DuplicateSession(SessionId),
}

type IdSource = Box<dyn FnMut() -> SessionId + Send>;

/// Owns every session of one process.
pub struct Engine {
    deps: AgentDeps,
    routing: Arc<RoutingTable>,
    audit: Arc<dyn AuditSink>,
    config: EngineConfig,
    slots: Arc<Semaphore>,
    sessions: Mutex<BTreeMap<SessionId, SessionHandle>>,
    ids: Mutex<IdSource>,
}

impl Engine {
    /// Session ids default to `s1`, `s2`, ... in start order.
    pub fn new(deps: AgentDeps, routing: Arc<RoutingTable>, audit: Arc<dyn AuditSink>, config: EngineConfig) -> Self {
        let entry = AuditEntry {
            session_id: None,
            kind: AuditKind::RulebookLoaded,
            at: deps.clock.wall_now(),
            rulebook_version: deps.rulebook.version.clone(),
            payload: serde_json::to_value(&*deps.rulebook).expect("rulebook serializes"),
        };
        if let Err(e) = audit.append(entry) {
            tracing::warn!(error = %e, "could not record rulebook load");
        }
        let mut n = 0u64;
        Self {
            slots: Arc::new(Semaphore::new(config.capacity)),
            deps,
            routing,
            audit,
            config,
            sessions: Mutex::new(BTreeMap::new()),
            ids: Mutex::new(Box::new(move || {
                n += 1;
                SessionId(format!("s{n}"))
            })),
        }
    }

    pub fn with_id_source(self, ids: impl FnMut() -> SessionId + Send + 'static) -> Self {
        *self.ids.lock().expect("id source lock") = Box::new(ids);
        self
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    pub fn deps(&self) -> &AgentDeps {
        &self.deps
    }

    pub fn rulebook_version(&self) -> &str {
        &self.deps.rulebook.version
    }

    /// Starts a session on the current tokio runtime.
    pub fn start_session(&self, proposal: ValidatedProposal) -> Result<SessionHandle, EngineError> {
        let permit = self
            .slots
            .clone()
            .try_acquire_owned()
            .map_err(|_| EngineError::CapacityExceeded(self.config.capacity))?;
        let id = (self.ids.lock().expect("id source lock"))();
        let mut sessions = self.sessions.lock().expect("sessions lock");
        if sessions.contains_key(&id) {
            return Err(EngineError::DuplicateSession(id));
        }
        let spawned = Coordinator::create(
            id.clone(),
            proposal,
            self.deps.clone(),
            self.routing.clone(),
            self.audit.clone(),
            Settings { stagger: self.config.stagger },
            permit,
        );
        sessions.insert(id, spawned.handle.clone());
        tokio::spawn(spawned.coordinator.run(spawned.rx));
        Ok(spawned.handle)
    }

    pub fn session(&self, id: &SessionId) -> Option<SessionHandle> {
        self.sessions.lock().expect("sessions lock").get(id).cloned()
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        self.sessions.lock().expect("sessions lock").keys().cloned().collect()
    }

    /// Sessions currently analyzing.
    pub fn active(&self) -> usize {
        self.config.capacity - self.slots.available_permits()
    }
}

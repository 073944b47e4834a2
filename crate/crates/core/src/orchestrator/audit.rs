//! Audit trail interface. The session coordinator reports every auditable
//! mutation here; durable storage lives with the service.

use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::SessionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    ProposalSubmitted,
    AgentReportStored,
    QuestionAsked,
    AnswerStored,
    ReportIssued,
    RulebookLoaded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// `None` for engine-level records such as `RulebookLoaded`.
    pub session_id: Option<SessionId>,
    pub kind: AuditKind,
    pub at: DateTime<Utc>,
    pub rulebook_version: String,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("audit store unavailable: {0}")]
    StoreUnavailable(String),
}

pub trait AuditSink: Send + Sync {
    /// Appends one record and returns its record id.
    fn append(&self, entry: AuditEntry) -> Result<u64, AuditError>;
}

/// Discards everything.
pub struct NoAudit;

impl AuditSink for NoAudit {
    fn append(&self, _entry: AuditEntry) -> Result<u64, AuditError> {
        Ok(0)
    }
}

/// Keeps records in memory; used by tests and headless reviews.
#[derive(Default)]
pub struct MemoryAudit {
    entries: Mutex<Vec<AuditEntry>>,
}

impl MemoryAudit {
    pub fn entries(&self) -> Vec<AuditEntry> {
        self.entries.lock().expect("audit lock").clone()
    }
}

impl AuditSink for MemoryAudit {
    fn append(&self, entry: AuditEntry) -> Result<u64, AuditError> {
        let mut entries = self.entries.lock().expect("audit lock");
        entries.push(entry);
        Ok(entries.len() as u64)
    }
}

/// Always fails, for exercising degraded mode.
pub struct UnavailableAudit;

impl AuditSink for UnavailableAudit {
    fn append(&self, _entry: AuditEntry) -> Result<u64, AuditError> {
        Err(AuditError::StoreUnavailable("store is read-only".into()))
    }
}

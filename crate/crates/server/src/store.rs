//! Durable append-only audit store: one JSON record per line in a single file.
//!
//! Each record carries the SHA-256 digest of its canonical payload so a
//! reviewer can check that nothing was edited after the fact. Records are
//! reloaded on start, which is what lets issued reports survive a restart.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use roundtable_core::orchestrator::{AuditEntry, AuditError, AuditKind, AuditSink};
use roundtable_core::{ConsolidatedReport, SessionId};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read audit store {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("audit store {path}, line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub record_id: u64,
    pub session_id: Option<SessionId>,
    pub at: DateTime<Utc>,
    pub kind: AuditKind,
    /// Hex SHA-256 of the canonical JSON payload.
    pub payload_digest: String,
    pub rulebook_version: String,
    pub payload: serde_json::Value,
}

impl AuditRecord {
    pub fn digest_matches(&self) -> bool {
        payload_digest(&self.payload) == self.payload_digest
    }
}

/// serde_json maps are key-ordered, so `to_vec` is already canonical.
pub fn payload_digest(payload: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(payload).expect("json values serialize");
    hex::encode(Sha256::digest(&bytes))
}

struct Inner {
    file: Option<File>,
    records: Vec<AuditRecord>,
}

pub struct AuditStore {
    path: PathBuf,
    /// Why the file could not be opened for appending, if it could not.
    unavailable: Option<String>,
    inner: Mutex<Inner>,
}

impl AuditStore {
    /// Loads existing records and opens the file for appending. A file that
    /// cannot be read or written still opens empty; appends then fail with
    /// `StoreUnavailable`. Corrupt files are an error.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let records = match load(&path) {
            Ok(r) => r,
            Err(StoreError::Io { source, .. }) => {
                let why = format!("{}: {source}", path.display());
                return Ok(Self { path, unavailable: Some(why), inner: Mutex::new(Inner { file: None, records: Vec::new() }) });
            }
            Err(e) => return Err(e),
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            let _ = std::fs::create_dir_all(dir);
        }
        let (file, unavailable) = match OpenOptions::new().create(true).append(true).open(&path) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(format!("{}: {e}", path.display()))),
        };
        Ok(Self { path, unavailable, inner: Mutex::new(Inner { file, records }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn is_writable(&self) -> bool {
        self.unavailable.is_none()
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.inner.lock().expect("audit store lock").records.clone()
    }

    pub fn session_records(&self, id: &SessionId) -> Vec<AuditRecord> {
        let inner = self.inner.lock().expect("audit store lock");
        inner.records.iter().filter(|r| r.session_id.as_ref() == Some(id)).cloned().collect()
    }

    /// The last report issued for a session, from this or an earlier process.
    pub fn latest_report(&self, id: &SessionId) -> Option<ConsolidatedReport> {
        let inner = self.inner.lock().expect("audit store lock");
        inner
            .records
            .iter()
            .rev()
            .filter(|r| r.kind == AuditKind::ReportIssued && r.session_id.as_ref() == Some(id))
            .find_map(|r| serde_json::from_value(r.payload.clone()).ok())
    }

    /// Largest `N` among stored session ids of the form `sN`.
    pub fn max_session_number(&self) -> u64 {
        let inner = self.inner.lock().expect("audit store lock");
        inner
            .records
            .iter()
            .filter_map(|r| r.session_id.as_ref()?.0.strip_prefix('s')?.parse().ok())
            .max()
            .unwrap_or(0)
    }
}

fn load(path: &Path) -> Result<Vec<AuditRecord>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(StoreError::Io { path: path.to_path_buf(), source }),
    };
    let mut out: Vec<AuditRecord> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let corrupt = |message: String| StoreError::Corrupt { path: path.to_path_buf(), line: i + 1, message };
        let rec: AuditRecord = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
        if out.last().is_some_and(|prev| rec.record_id <= prev.record_id) {
            return Err(corrupt(format!("record id {} is not increasing", rec.record_id)));
        }
        if !rec.digest_matches() {
            return Err(corrupt(format!("payload digest mismatch on record {}", rec.record_id)));
        }
        out.push(rec);
    }
    Ok(out)
}

impl AuditSink for AuditStore {
    fn append(&self, entry: AuditEntry) -> Result<u64, AuditError> {
        if let Some(why) = &self.unavailable {
            return Err(AuditError::StoreUnavailable(why.clone()));
        }
        let mut inner = self.inner.lock().expect("audit store lock");
        let record = AuditRecord {
            record_id: inner.records.last().map_or(1, |r| r.record_id + 1),
            session_id: entry.session_id,
            at: entry.at,
            kind: entry.kind,
            payload_digest: payload_digest(&entry.payload),
            rulebook_version: entry.rulebook_version,
            payload: entry.payload,
        };
        let mut line = serde_json::to_string(&record).expect("audit records serialize");
        line.push('\n');
        let file = inner.file.as_mut().expect("writable store has a file");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| AuditError::StoreUnavailable(e.to_string()))?;
        let id = record.record_id;
        inner.records.push(record);
        Ok(id)
    }
}

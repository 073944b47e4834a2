//! Append-only, gap-free session event log with replaying subscribers.

use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use futures::Stream;
use thiserror::Error;
use tokio::sync::watch;

use crate::domain::{EventPayload, SessionEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("expected seq {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Default)]
struct Inner {
    events: Vec<SessionEvent>,
    closed: bool,
}

/// Every subscriber sees the full ordered log; a late subscriber first
/// replays what it missed and then follows live appends.
#[derive(Debug)]
pub struct EventLog {
    inner: Mutex<Inner>,
    changed: watch::Sender<usize>,
}

impl Default for EventLog {
    fn default() -> Self {
        Self::new()
    }
}

impl EventLog {
    pub fn new() -> Self {
        Self { inner: Mutex::new(Inner::default()), changed: watch::channel(0).0 }
    }

    /// A closed log holding previously recorded events in any order; once
    /// sorted, seqs must run 0, 1, 2, ...
    pub fn from_events(mut events: Vec<SessionEvent>) -> Result<Self, LogError> {
        events.sort_by_key(|e| e.seq);
        for (i, e) in events.iter().enumerate() {
            if e.seq != i as u64 {
                return Err(LogError::Gap { expected: i as u64, found: e.seq });
            }
        }
        let log = Self::new();
        {
            let mut inner = log.inner.lock().expect("event log lock");
            inner.events = events;
            inner.closed = true;
        }
        Ok(log)
    }

    /// Parses a JSON-lines event log as written by [`EventLog::to_jsonl`].
    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let events = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })
            })
            .collect::<Result<Vec<SessionEvent>, _>>()?;
        Self::from_events(events)
    }

    pub fn to_jsonl(&self) -> String {
        self.snapshot()
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }

    pub(crate) fn append(&self, at: DateTime<Utc>, elapsed_ms: u64, payload: EventPayload) -> Option<SessionEvent> {
        let mut inner = self.inner.lock().expect("event log lock");
        if inner.closed {
            return None;
        }
        let event = SessionEvent { seq: inner.events.len() as u64, at, elapsed_ms, payload };
        inner.events.push(event.clone());
        let len = inner.events.len();
        drop(inner);
        self.changed.send_replace(len);
        Some(event)
    }

    pub fn close(&self) {
        self.inner.lock().expect("event log lock").closed = true;
        self.changed.send_modify(|_| {});
    }

    pub fn is_closed(&self) -> bool {
        self.inner.lock().expect("event log lock").closed
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("event log lock").events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<SessionEvent> {
        self.inner.lock().expect("event log lock").events.clone()
    }

    /// Events with seq greater than `after`, or all events for `None`.
    pub fn since(&self, after: Option<u64>) -> Vec<SessionEvent> {
        let inner = self.inner.lock().expect("event log lock");
        inner.events[start_index(after).min(inner.events.len())..].to_vec()
    }

    /// Live stream of events after `after`; ends once the log is closed and drained.
    pub fn subscribe(self: &Arc<Self>, after: Option<u64>) -> impl Stream<Item = SessionEvent> + Send + 'static {
        let rx = self.changed.subscribe();
        futures::stream::unfold((self.clone(), rx, start_index(after)), |(log, mut rx, next)| async move {
            loop {
                rx.borrow_and_update();
                {
                    let inner = log.inner.lock().expect("event log lock");
                    if let Some(e) = inner.events.get(next) {
                        let e = e.clone();
                        drop(inner);
                        return Some((e, (log, rx, next + 1)));
                    }
                    if inner.closed {
                        return None;
                    }
                }
                if rx.changed().await.is_err() {
                    return None;
                }
            }
        })
    }
}

fn start_index(after: Option<u64>) -> usize {
    after.map(|k| k.saturating_add(1) as usize).unwrap_or(0)
}

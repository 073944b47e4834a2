use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AgentRole, AgentStatus, Inconsistency, ReportStatus, RiskLevel};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SessionId {
    fn from(s: &str) -> Self {
        SessionId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The ordered server-push unit of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub at: DateTime<Utc>,
    /// Milliseconds since the session started, on the engine clock.
    pub elapsed_ms: u64,
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    SessionStarted {
        session_id: super::SessionId,
        proposal_id: String,
        rulebook_version: String,
    },
    AgentStatusChanged {
        role: AgentRole,
        round: u32,
        status: AgentStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    AgentDelta {
        role: AgentRole,
        round: u32,
        text: String,
    },
    AgentReportReady {
        role: AgentRole,
        round: u32,
        status: ReportStatus,
    },
    InconsistencyFlagged {
        inconsistency: Inconsistency,
    },
    RecheckStarted {
        issue_key: String,
        roles: Vec<AgentRole>,
    },
    QuestionRouted {
        question_id: QuestionId,
        role: AgentRole,
        matched: Vec<String>,
    },
    AnswerDelta {
        question_id: QuestionId,
        text: String,
    },
    AnswerReady {
        question_id: QuestionId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    ReportReady {
        round: u32,
        overall_risk: RiskLevel,
    },
    SessionFailed {
        reason: String,
    },
}

impl EventPayload {
    /// Wire name of the payload, used as the SSE `event:` field.
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::SessionStarted { .. } => "session_started",
            EventPayload::AgentStatusChanged { .. } => "agent_status_changed",
            EventPayload::AgentDelta { .. } => "agent_delta",
            EventPayload::AgentReportReady { .. } => "agent_report_ready",
            EventPayload::InconsistencyFlagged { .. } => "inconsistency_flagged",
            EventPayload::RecheckStarted { .. } => "recheck_started",
            EventPayload::QuestionRouted { .. } => "question_routed",
            EventPayload::AnswerDelta { .. } => "answer_delta",
            EventPayload::AnswerReady { .. } => "answer_ready",
            EventPayload::ReportReady { .. } => "report_ready",
            EventPayload::SessionFailed { .. } => "session_failed",
        }
    }
}

//! Shared vocabulary of the engine.
//!
//! Everything here is an immutable value type. Operations are pure functions
//! ([`normalize_issue_key`], [`validate_proposal`]).

mod event;
mod finding;
mod issue_key;
mod proposal;
mod report;
mod role;

pub use event::{EventPayload, QuestionId, SessionEvent, SessionId};
pub use finding::{
    Citation, CitationKind, ConflictDetails, ConflictKind, Finding, Inconsistency, MitigationAction,
};
pub use issue_key::{issue_key_or_fallback, normalize_issue_key, ISSUE_KEY_TOKENS};
pub use proposal::{
    validate_proposal, Attachment, Proposal, ValidatedProposal, DEFAULT_MAX_PROPOSAL_BYTES,
};
pub use report::{AgentReport, ConsolidatedReport, MergedFinding, ReportStatus};
pub use role::{AgentRole, AgentStatus, RiskLevel};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("description has no tokens left after stopword removal")]
    EmptyDescription,
    #[error("proposal body is empty")]
    EmptyBody,
    #[error("proposal is {actual} bytes, limit is {limit}")]
    BodyTooLarge { actual: usize, limit: usize },
    #[error("citation authority {0} is outside [0, 1]")]
    AuthorityOutOfRange(f64),
    #[error("{0:?} citation requires a locator")]
    MissingLocator(CitationKind),
}


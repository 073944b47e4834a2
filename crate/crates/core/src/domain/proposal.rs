use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::DomainError;

/// Default cap on the total text size of a proposal (64 KiB).
pub const DEFAULT_MAX_PROPOSAL_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    pub text: String,
}

/// A product or feature description submitted for review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: String,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    pub submitted_at: DateTime<Utc>,
    #[serde(default)]
    pub jurisdiction_tags: Vec<String>,
}

impl Proposal {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            body: body.into(),
            attachments: Vec::new(),
            submitted_at: DateTime::<Utc>::UNIX_EPOCH,
            jurisdiction_tags: Vec::new(),
        }
    }

    /// Reads the plain-text proposal format: the first non-empty line is the
    /// title (an optional leading `#` or `Title:` is dropped), an optional
    /// `Jurisdictions: a, b` line may follow it, and the rest is the body.
    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        let mut lines = text.lines().skip_while(|l| l.trim().is_empty());
        let title = lines.next().unwrap_or_default().trim();
        let title = title.trim_start_matches('#').trim();
        let title = title.strip_prefix("Title:").unwrap_or(title).trim().to_string();
        let rest: Vec<&str> = lines.collect();
        let mut p = Proposal::new(id, title, "");
        let mut body_start = 0;
        if let Some(first) = rest.iter().position(|l| !l.trim().is_empty()) {
            if let Some(tags) = rest[first].trim().strip_prefix("Jurisdictions:") {
                p.jurisdiction_tags =
                    tags.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
                body_start = first + 1;
            }
        }
        p.body = rest[body_start..].join("\n").trim().to_string();
        p
    }

    /// Bytes of text counted against the size limit.
    pub fn text_size(&self) -> usize {
        self.title.len()
            + self.body.len()
            + self
                .attachments
                .iter()
                .map(|a| a.name.len() + a.text.len())
                .sum::<usize>()
    }
}

/// A proposal that passed structural validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatedProposal(Proposal);

impl ValidatedProposal {
    pub fn proposal(&self) -> &Proposal {
        &self.0
    }

    pub fn into_inner(self) -> Proposal {
        self.0
    }
}

impl std::ops::Deref for ValidatedProposal {
    type Target = Proposal;

    fn deref(&self) -> &Proposal {
        &self.0
    }
}

pub fn validate_proposal(p: Proposal, max_bytes: usize) -> Result<ValidatedProposal, DomainError> {
    if p.body.trim().is_empty() {
        return Err(DomainError::EmptyBody);
    }
    let actual = p.text_size();
    if actual > max_bytes {
        return Err(DomainError::BodyTooLarge { actual, limit: max_bytes });
    }
    Ok(ValidatedProposal(p))
}

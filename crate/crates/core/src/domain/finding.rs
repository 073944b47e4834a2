use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{issue_key_or_fallback, AgentRole, DomainError, RiskLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationKind {
    Statute,
    InternalRule,
    PrecedentCase,
    WebSource,
}

/// A source link attached to a judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    pub source_id: String,
    pub kind: CitationKind,
    pub locator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quote: Option<String>,
    pub authority: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rulebook_version: Option<String>,
}

impl Citation {
    pub fn new(
        source_id: impl Into<String>,
        kind: CitationKind,
        locator: impl Into<String>,
        authority: f64,
    ) -> Result<Self, DomainError> {
        let c = Citation {
            source_id: source_id.into(),
            kind,
            locator: locator.into(),
            url: None,
            quote: None,
            authority,
            rulebook_version: None,
        };
        c.check()?;
        Ok(c)
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self
    }

    pub fn with_quote(mut self, quote: impl Into<String>) -> Self {
        self.quote = Some(quote.into());
        self
    }

    pub fn with_rulebook_version(mut self, version: impl Into<String>) -> Self {
        self.rulebook_version = Some(version.into());
        self
    }

    pub fn check(&self) -> Result<(), DomainError> {
        if !(0.0..=1.0).contains(&self.authority) {
            return Err(DomainError::AuthorityOutOfRange(self.authority));
        }
        if matches!(self.kind, CitationKind::Statute | CitationKind::InternalRule)
            && self.locator.trim().is_empty()
        {
            return Err(DomainError::MissingLocator(self.kind));
        }
        Ok(())
    }

    /// Identity used when unioning citations from several agents.
    pub fn dedup_key(&self) -> (CitationKind, String, Option<String>) {
        (self.kind, self.locator.clone(), self.url.clone())
    }
}

/// One graded judgment produced by an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub finding_id: String,
    pub issue_key: String,
    pub description: String,
    pub risk: RiskLevel,
    pub basis: Vec<Citation>,
    pub origin: AgentRole,
    pub round: u32,
    /// Set when a Medium+ claim had no supporting citation and was downgraded to Low.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unsupported_claim: Option<RiskLevel>,
}

impl Finding {
    /// Builds a finding whose issue key derives from `topic`, enforcing grounding.
    pub fn grounded(
        finding_id: impl Into<String>,
        topic: &str,
        description: impl Into<String>,
        risk: RiskLevel,
        basis: Vec<Citation>,
        origin: AgentRole,
        round: u32,
    ) -> Self {
        let mut f = Finding {
            finding_id: finding_id.into(),
            issue_key: issue_key_or_fallback(topic),
            description: description.into(),
            risk,
            basis,
            origin,
            round,
            unsupported_claim: None,
        };
        f.enforce_grounding();
        f
    }

    /// Downgrades an uncited Medium+ finding to Low and records the original claim.
    pub fn enforce_grounding(&mut self) -> bool {
        if self.risk.is_elevated() && self.basis.is_empty() {
            self.unsupported_claim = Some(self.risk);
            self.risk = RiskLevel::Low;
            return true;
        }
        false
    }

    pub fn is_grounded(&self) -> bool {
        !self.risk.is_elevated() || !self.basis.is_empty()
    }
}

/// A concrete remediation step bound to a finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationAction {
    pub action_id: String,
    pub for_finding: String,
    pub topic: String,
    pub text: String,
    pub grade: RiskLevel,
    /// Route to human experts.
    pub escalate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeline_hint: Option<String>,
}

impl MitigationAction {
    /// Re-grades the action; High and Red Line always escalate.
    pub fn regrade(&mut self, grade: RiskLevel) {
        self.grade = grade;
        if grade >= RiskLevel::High {
            self.escalate = true;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    ClauseConflict,
    RiskGradeConflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "by_role", rename_all = "snake_case")]
pub enum ConflictDetails {
    Locators(BTreeMap<AgentRole, BTreeSet<String>>),
    Grades(BTreeMap<AgentRole, RiskLevel>),
}

/// Two or more agents disagree about the same issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub issue_key: String,
    pub agents: BTreeSet<AgentRole>,
    pub kind: ConflictKind,
    pub details: ConflictDetails,
    pub resolved: bool,
}

impl Inconsistency {
    pub fn is_well_formed(&self) -> bool {
        if self.agents.len() < 2 {
            return false;
        }
        match (&self.kind, &self.details) {
            (ConflictKind::RiskGradeConflict, ConflictDetails::Grades(g)) => {
                g.values().collect::<BTreeSet<_>>().len() >= 2
            }
            (ConflictKind::ClauseConflict, ConflictDetails::Locators(_)) => true,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn citation_authority_must_be_a_unit_interval_value() {
        assert!(Citation::new("s", CitationKind::WebSource, "", 1.2).is_err());
        assert!(Citation::new("s", CitationKind::WebSource, "", 0.0).is_ok());
    }

    #[test]
    fn statute_citations_need_locators() {
        assert_eq!(
            Citation::new("s", CitationKind::Statute, "  ", 0.9).unwrap_err(),
            DomainError::MissingLocator(CitationKind::Statute)
        );
    }

    #[test]
    fn uncited_medium_finding_is_downgraded() {
        let f = Finding::grounded(
            "LI-r0-1",
            "Consent missing",
            "Consent missing",
            RiskLevel::Medium,
            vec![],
            AgentRole::LegalInterpreter,
            0,
        );
        assert_eq!(f.risk, RiskLevel::Low);
        assert_eq!(f.unsupported_claim, Some(RiskLevel::Medium));
        assert_eq!(f.issue_key, "consent+missing");
    }

    #[test]
    fn regrade_to_high_forces_escalation() {
        let mut m = MitigationAction {
            action_id: "M1".into(),
            for_finding: "F1".into(),
            topic: "t".into(),
            text: "x".into(),
            grade: RiskLevel::Low,
            escalate: false,
            timeline_hint: None,
        };
        m.regrade(RiskLevel::High);
        assert!(m.escalate);
    }
}

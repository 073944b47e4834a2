use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AgentRole, Citation, Finding, Inconsistency, MitigationAction, RiskLevel, SessionId};
use crate::agents::ParsedReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Ok,
    ParseDegraded,
    Failed,
}

/// One agent's structured output for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub role: AgentRole,
    pub round: u32,
    pub raw_text: String,
    pub findings: Vec<Finding>,
    pub citations: Vec<Citation>,
    pub parsed: Option<ParsedReport>,
    pub status: ReportStatus,
    /// Why parsing degraded, one entry per problem.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl AgentReport {
    pub fn failed(role: AgentRole, round: u32, raw_text: String, reason: impl Into<String>) -> Self {
        AgentReport {
            role,
            round,
            raw_text,
            findings: Vec::new(),
            citations: Vec::new(),
            parsed: None,
            status: ReportStatus::Failed,
            notes: Vec::new(),
            failure: Some(reason.into()),
        }
    }

    pub fn is_usable(&self) -> bool {
        self.status != ReportStatus::Failed
    }

    /// Every citation referenced by a finding is listed in `citations`.
    pub fn citations_cover_findings(&self) -> bool {
        let listed: BTreeSet<_> = self.citations.iter().map(Citation::dedup_key).collect();
        self.findings
            .iter()
            .flat_map(|f| f.basis.iter())
            .all(|c| listed.contains(&c.dedup_key()))
    }

    /// Appends any finding citations missing from `citations`, preserving order.
    pub fn index_finding_citations(&mut self) {
        let mut seen: BTreeSet<_> = self.citations.iter().map(Citation::dedup_key).collect();
        let extra: Vec<Citation> = self
            .findings
            .iter()
            .flat_map(|f| f.basis.iter())
            .filter(|c| seen.insert(c.dedup_key()))
            .cloned()
            .collect();
        self.citations.extend(extra);
    }
}

/// A finding after cross-agent merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedFinding {
    #[serde(flatten)]
    pub finding: Finding,
    pub contributors: BTreeSet<AgentRole>,
}

/// The merged, graded output of a session round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedReport {
    pub session_id: SessionId,
    pub round: u32,
    pub overall_risk: RiskLevel,
    pub summary: String,
    pub findings: Vec<MergedFinding>,
    pub mitigations: Vec<MitigationAction>,
    pub inconsistencies: Vec<Inconsistency>,
    pub citations_index: BTreeMap<String, Vec<Citation>>,
    pub launch_conditions: Vec<String>,
    /// Missing-analysis notices for agents that failed.
    #[serde(default)]
    pub notices: Vec<String>,
    pub rulebook_version: String,
    pub generated_at: DateTime<Utc>,
}

impl ConsolidatedReport {
    /// Every Medium+ finding has at least one indexed citation.
    pub fn is_grounded(&self) -> bool {
        self.findings.iter().all(|m| {
            !m.finding.risk.is_elevated()
                || self
                    .citations_index
                    .get(&m.finding.finding_id)
                    .is_some_and(|c| !c.is_empty())
        })
    }

    pub fn unresolved_inconsistencies(&self) -> impl Iterator<Item = &Inconsistency> {
        self.inconsistencies.iter().filter(|i| !i.resolved)
    }
}

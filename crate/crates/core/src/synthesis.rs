//! Cross-agent merge: conflict detection, recheck planning, risk
//! aggregation and consolidated report assembly.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::agents::{Focus, ParsedReport};
use crate::domain::{
    AgentReport, AgentRole, Citation, CitationKind, ConflictDetails, ConflictKind, ConsolidatedReport, Finding,
    Inconsistency, MergedFinding, MitigationAction, ReportStatus, RiskLevel, SessionId,
};

/// Recheck rounds allowed per session.
pub const RECHECK_BUDGET: u32 = 1;

/// Grade gap, in order steps, that counts as incompatible.
pub const GRADE_CONFLICT_STEPS: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("recheck budget exhausted")]
    RecheckBudgetExhausted,
    #[error("inconsistency is already resolved")]
    AlreadyResolved,
    #[error("no usable agent reports")]
    NoUsableReports,
}

#[derive(Debug, Default)]
struct RoleView {
    statutes: BTreeSet<String>,
    risk: Option<RiskLevel>,
}

fn views(reports: &[AgentReport]) -> BTreeMap<String, BTreeMap<AgentRole, RoleView>> {
    let mut by_key: BTreeMap<String, BTreeMap<AgentRole, RoleView>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.is_usable()) {
        for f in &r.findings {
            let v = by_key.entry(f.issue_key.clone()).or_default().entry(r.role).or_default();
            v.statutes.extend(
                f.basis.iter().filter(|c| c.kind == CitationKind::Statute).map(|c| c.locator.clone()),
            );
            v.risk = v.risk.max(Some(f.risk));
        }
    }
    by_key
}

/// Conflicts between agents that reported on the same issue key.
///
/// Clause conflicts compare statute locators only; internal checklist rules
/// and web sources are not competing readings of the law. Output is sorted by
/// issue key and kind, so it does not depend on report order.
pub fn detect_inconsistencies(reports: &[AgentReport]) -> Vec<Inconsistency> {
    let mut out = Vec::new();
    for (key, roles) in views(reports) {
        if roles.len() < 2 {
            continue;
        }
        let list: Vec<(&AgentRole, &RoleView)> = roles.iter().collect();
        let mut clause: BTreeSet<AgentRole> = BTreeSet::new();
        let mut grade: BTreeSet<AgentRole> = BTreeSet::new();
        for (i, (ra, a)) in list.iter().enumerate() {
            for (rb, b) in &list[i + 1..] {
                if !a.statutes.is_empty() && !b.statutes.is_empty() && a.statutes.is_disjoint(&b.statutes) {
                    clause.extend([**ra, **rb]);
                }
                if let (Some(x), Some(y)) = (a.risk, b.risk) {
                    if x.steps_between(y) >= GRADE_CONFLICT_STEPS {
                        grade.extend([**ra, **rb]);
                    }
                }
            }
        }
        if !clause.is_empty() {
            let details = clause.iter().map(|r| (*r, roles[r].statutes.clone())).collect();
            out.push(Inconsistency {
                issue_key: key.clone(),
                agents: clause,
                kind: ConflictKind::ClauseConflict,
                details: ConflictDetails::Locators(details),
                resolved: false,
            });
        }
        if !grade.is_empty() {
            let details = grade.iter().filter_map(|r| roles[r].risk.map(|k| (*r, k))).collect();
            out.push(Inconsistency {
                issue_key: key,
                agents: grade,
                kind: ConflictKind::RiskGradeConflict,
                details: ConflictDetails::Grades(details),
                resolved: false,
            });
        }
    }
    out
}

fn severity(inc: &Inconsistency, reports: &[AgentReport]) -> RiskLevel {
    reports
        .iter()
        .flat_map(|r| r.findings.iter())
        .filter(|f| f.issue_key == inc.issue_key)
        .map(|f| f.risk)
        .max()
        .unwrap_or(RiskLevel::Low)
}

/// The unresolved inconsistency to recheck first: highest risk on the issue,
/// then clause conflicts before grade conflicts, then issue key order.
pub fn most_severe<'a>(incs: &'a [Inconsistency], reports: &[AgentReport]) -> Option<&'a Inconsistency> {
    incs.iter().filter(|i| !i.resolved).min_by(|a, b| {
        severity(b, reports)
            .cmp(&severity(a, reports))
            .then(a.kind.cmp(&b.kind))
            .then(a.issue_key.cmp(&b.issue_key))
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecheckTask {
    pub roles: Vec<AgentRole>,
    pub focus: Focus,
}

/// Hands out recheck tasks until the per-session budget is spent.
#[derive(Debug, Clone)]
pub struct RecheckPlanner {
    remaining: u32,
}

impl Default for RecheckPlanner {
    fn default() -> Self {
        Self { remaining: RECHECK_BUDGET }
    }
}

impl RecheckPlanner {
    pub fn remaining(&self) -> u32 {
        self.remaining
    }

    pub fn plan(&mut self, inc: &Inconsistency) -> Result<RecheckTask, SynthesisError> {
        if inc.resolved {
            return Err(SynthesisError::AlreadyResolved);
        }
        if self.remaining == 0 {
            return Err(SynthesisError::RecheckBudgetExhausted);
        }
        self.remaining -= 1;
        Ok(RecheckTask {
            roles: inc.agents.iter().copied().collect(),
            focus: Focus { issue_key: inc.issue_key.clone(), note: describe(inc) },
        })
    }
}

fn describe(inc: &Inconsistency) -> String {
    let parts: Vec<String> = match &inc.details {
        ConflictDetails::Locators(m) => m
            .iter()
            .map(|(r, locs)| format!("{} cited {}", r.display_name(), locs.iter().cloned().collect::<Vec<_>>().join(", ")))
            .collect(),
        ConflictDetails::Grades(m) => {
            m.iter().map(|(r, g)| format!("{} graded it {}", r.display_name(), g.label())).collect()
        }
    };
    format!("The panel disagrees on this point: {}.", parts.join("; "))
}

/// Replaces the findings for `issue_key` in `original` with those from the
/// recheck report. Returns the updated report and the superseded findings.
/// An unusable recheck, or one that says nothing about the issue, leaves the
/// original findings in place.
pub fn apply_recheck(original: &AgentReport, recheck: &AgentReport, issue_key: &str) -> (AgentReport, Vec<Finding>) {
    let mut updated = original.clone();
    let fresh: Vec<Finding> =
        recheck.findings.iter().filter(|f| f.issue_key == issue_key).cloned().collect();
    if !recheck.is_usable() || fresh.is_empty() {
        updated.notes.push(format!("recheck round {} left \"{issue_key}\" unchanged", recheck.round));
        return (updated, Vec::new());
    }
    let (old, kept): (Vec<Finding>, Vec<Finding>) =
        original.findings.iter().cloned().partition(|f| f.issue_key == issue_key);
    updated.findings = kept;
    updated.findings.extend(fresh);
    updated.round = recheck.round;
    updated.notes.push(format!("recheck round {} replaced findings for \"{issue_key}\"", recheck.round));
    updated.index_finding_citations();
    (updated, old)
}

/// Re-detects after a recheck: each flagged inconsistency is resolved when
/// the same (issue key, kind) no longer conflicts. Newly surfaced conflicts
/// are appended unresolved.
pub fn resolve_after_recheck(flagged: &[Inconsistency], reports: &[AgentReport]) -> Vec<Inconsistency> {
    let now = detect_inconsistencies(reports);
    let still: BTreeSet<(String, ConflictKind)> = now.iter().map(|i| (i.issue_key.clone(), i.kind)).collect();
    let mut out: Vec<Inconsistency> = flagged
        .iter()
        .map(|i| {
            let mut i = i.clone();
            i.resolved = !still.contains(&(i.issue_key.clone(), i.kind));
            i
        })
        .collect();
    let known: BTreeSet<(String, ConflictKind)> = flagged.iter().map(|i| (i.issue_key.clone(), i.kind)).collect();
    out.extend(now.into_iter().filter(|i| !known.contains(&(i.issue_key.clone(), i.kind))));
    out
}

pub fn aggregate_risk<'a>(findings: impl IntoIterator<Item = &'a Finding>, checklist_overall: RiskLevel) -> RiskLevel {
    findings.into_iter().map(|f| f.risk).fold(checklist_overall, RiskLevel::max)
}

pub const ESCALATION_TEXT: &str = "Escalate to the compliance committee for expert review before launch.";

/// Inputs to [`consolidate`] besides the final per-role reports.
#[derive(Debug, Clone)]
pub struct ConsolidationInput<'a> {
    pub session_id: SessionId,
    pub round: u32,
    pub reports: &'a [AgentReport],
    pub inconsistencies: &'a [Inconsistency],
    /// Findings replaced during a recheck, used to remap mitigations.
    pub superseded: &'a [Finding],
    pub rulebook_version: &'a str,
    pub generated_at: DateTime<Utc>,
}

fn merge_citations(into: &mut Vec<Citation>, from: &[Citation]) {
    for c in from {
        if !into.iter().any(|x| x.dedup_key() == c.dedup_key()) {
            into.push(c.clone());
        }
    }
}

pub fn consolidate(input: ConsolidationInput<'_>) -> Result<ConsolidatedReport, SynthesisError> {
    let mut reports: Vec<&AgentReport> = input.reports.iter().collect();
    reports.sort_by_key(|r| r.role);
    if !reports.iter().any(|r| r.is_usable()) {
        return Err(SynthesisError::NoUsableReports);
    }

    let mut notices = Vec::new();
    for role in AgentRole::ALL {
        match reports.iter().find(|r| r.role == role) {
            None => notices.push(format!("Missing analysis: {} did not report.", role.display_name())),
            Some(r) if r.status == ReportStatus::Failed => notices.push(format!(
                "Missing analysis: {} failed ({}).",
                role.display_name(),
                r.failure.as_deref().unwrap_or("unknown error")
            )),
            Some(r) if r.status == ReportStatus::ParseDegraded => notices.push(format!(
                "{} output deviated from its template; findings are best effort.",
                role.display_name()
            )),
            Some(_) => {}
        }
    }

    // Merge by issue key in role order, then order of appearance.
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<&Finding>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.is_usable()) {
        for f in &r.findings {
            if !groups.contains_key(&f.issue_key) {
                order.push(f.issue_key.clone());
            }
            groups.entry(f.issue_key.clone()).or_default().push(f);
        }
    }
    let mut merged = Vec::new();
    let mut key_to_id: BTreeMap<String, String> = BTreeMap::new();
    let mut citations_index = BTreeMap::new();
    for (n, key) in order.iter().enumerate() {
        let group = &groups[key];
        let lead = group.iter().copied().fold(group[0], |best, f| if f.risk > best.risk { f } else { best });
        let mut basis = Vec::new();
        for f in group {
            merge_citations(&mut basis, &f.basis);
        }
        let id = format!("F{}", n + 1);
        let claimed = group.iter().filter_map(|f| f.unsupported_claim).max();
        let mut finding = Finding {
            finding_id: id.clone(),
            issue_key: key.clone(),
            description: lead.description.clone(),
            risk: lead.risk,
            basis,
            origin: lead.origin,
            round: group.iter().map(|f| f.round).max().unwrap_or(0),
            unsupported_claim: claimed.filter(|c| *c > lead.risk),
        };
        finding.enforce_grounding();
        if !finding.basis.is_empty() {
            citations_index.insert(id.clone(), finding.basis.clone());
        }
        key_to_id.insert(key.clone(), id);
        merged.push(MergedFinding { contributors: group.iter().map(|f| f.origin).collect(), finding });
    }

    let id_to_key: BTreeMap<&str, &str> = reports
        .iter()
        .flat_map(|r| r.findings.iter())
        .chain(input.superseded.iter())
        .map(|f| (f.finding_id.as_str(), f.issue_key.as_str()))
        .collect();
    let risk_of: BTreeMap<&str, RiskLevel> =
        merged.iter().map(|m| (m.finding.finding_id.as_str(), m.finding.risk)).collect();

    let plan = reports.iter().filter(|r| r.is_usable()).find_map(|r| match &r.parsed {
        Some(ParsedReport::RiskPlan(p)) => Some(p),
        _ => None,
    });
    let mut mitigations: Vec<MitigationAction> = Vec::new();
    if let Some(plan) = plan {
        for m in &plan.mitigations {
            let Some(target) = id_to_key.get(m.for_finding.as_str()).and_then(|k| key_to_id.get(*k)) else {
                notices.push(format!("Mitigation \"{}\" refers to an unknown finding and was dropped.", m.topic));
                continue;
            };
            let mut m = m.clone();
            m.for_finding = target.clone();
            m.regrade(risk_of[target.as_str()]);
            mitigations.push(m);
        }
    }
    for m in &merged {
        let f = &m.finding;
        if f.risk >= RiskLevel::High && !mitigations.iter().any(|a| a.for_finding == f.finding_id && a.escalate) {
            mitigations.push(MitigationAction {
                action_id: String::new(),
                for_finding: f.finding_id.clone(),
                topic: f.issue_key.replace('+', " "),
                text: ESCALATION_TEXT.to_string(),
                grade: f.risk,
                escalate: true,
                timeline_hint: Some("before launch".to_string()),
            });
        }
    }
    for (i, m) in mitigations.iter_mut().enumerate() {
        m.action_id = format!("M{}", i + 1);
    }

    let checklist_overall = reports
        .iter()
        .filter(|r| r.is_usable())
        .find_map(|r| match &r.parsed {
            Some(ParsedReport::Checklist(c)) => Some(c.overall),
            _ => None,
        })
        .unwrap_or(RiskLevel::Low);
    let overall_risk = aggregate_risk(merged.iter().map(|m| &m.finding), checklist_overall);

    let summary = reports
        .iter()
        .filter(|r| r.is_usable())
        .filter_map(|r| {
            let s = r.parsed.as_ref()?.summary();
            (!s.is_empty()).then(|| format!("{}: {s}", r.role.display_name()))
        })
        .collect::<Vec<_>>()
        .join("\n");

    Ok(ConsolidatedReport {
        session_id: input.session_id,
        round: input.round,
        overall_risk,
        summary,
        findings: merged,
        mitigations,
        inconsistencies: input.inconsistencies.to_vec(),
        citations_index,
        launch_conditions: plan.map(|p| p.launch_conditions.clone()).unwrap_or_default(),
        notices,
        rulebook_version: input.rulebook_version.to_string(),
        generated_at: input.generated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RiskPlan;
    use crate::domain::{Citation, CitationKind};

    fn statute(loc: &str) -> Citation {
        Citation::new(format!("s:{loc}"), CitationKind::Statute, loc, 1.0).unwrap()
    }

    fn finding(role: AgentRole, n: u32, topic: &str, risk: RiskLevel, cites: &[&str]) -> Finding {
        Finding::grounded(
            format!("{}-r0-{n}", role.code()),
            topic,
            topic,
            risk,
            cites.iter().map(|c| statute(c)).collect(),
            role,
            0,
        )
    }

    fn report(role: AgentRole, findings: Vec<Finding>) -> AgentReport {
        let mut r = AgentReport {
            role,
            round: 0,
            raw_text: String::new(),
            findings,
            citations: Vec::new(),
            parsed: None,
            status: ReportStatus::Ok,
            notes: Vec::new(),
            failure: None,
        };
        r.index_finding_citations();
        r
    }

    fn input<'a>(reports: &'a [AgentReport], incs: &'a [Inconsistency]) -> ConsolidationInput<'a> {
        ConsolidationInput {
            session_id: SessionId::from("s"),
            round: 0,
            reports,
            inconsistencies: incs,
            superseded: &[],
            rulebook_version: "v",
            generated_at: DateTime::<Utc>::UNIX_EPOCH,
        }
    }

    #[test]
    fn disjoint_clauses_conflict() {
        let reports = vec![
            report(AgentRole::LegalInterpreter, vec![finding(AgentRole::LegalInterpreter, 1, "consent", RiskLevel::High, &["PIPL Article 26"])]),
            report(AgentRole::RuleChecker, vec![finding(AgentRole::RuleChecker, 1, "consent", RiskLevel::High, &["GenAI Interim Measures Article 7"])]),
        ];
        let incs = detect_inconsistencies(&reports);
        assert_eq!(incs.len(), 1);
        assert_eq!(incs[0].kind, ConflictKind::ClauseConflict);
        assert!(incs[0].is_well_formed());
        let task = RecheckPlanner::default().plan(&incs[0]).unwrap();
        assert_eq!(task.roles, vec![AgentRole::LegalInterpreter, AgentRole::RuleChecker]);
    }

    #[test]
    fn two_step_grade_gap_conflicts() {
        let reports = vec![
            report(AgentRole::PrecedentResearcher, vec![finding(AgentRole::PrecedentResearcher, 1, "age bias", RiskLevel::Low, &[])]),
            report(AgentRole::LegalInterpreter, vec![finding(AgentRole::LegalInterpreter, 1, "age bias", RiskLevel::High, &["PIPL"])]),
        ];
        let incs = detect_inconsistencies(&reports);
        assert_eq!(incs.len(), 1);
        assert_eq!(incs[0].kind, ConflictKind::RiskGradeConflict);
    }

    #[test]
    fn agreement_is_not_a_conflict() {
        let f = |role| finding(role, 1, "consent", RiskLevel::Medium, &["PIPL"]);
        let reports = vec![
            report(AgentRole::LegalInterpreter, vec![f(AgentRole::LegalInterpreter)]),
            report(AgentRole::RuleChecker, vec![f(AgentRole::RuleChecker)]),
        ];
        assert!(detect_inconsistencies(&reports).is_empty());
    }

    #[test]
    fn budget_is_one_round() {
        let inc = Inconsistency {
            issue_key: "k".into(),
            agents: [AgentRole::LegalInterpreter, AgentRole::RuleChecker].into(),
            kind: ConflictKind::ClauseConflict,
            details: ConflictDetails::Locators(BTreeMap::new()),
            resolved: false,
        };
        let mut p = RecheckPlanner::default();
        assert!(p.plan(&inc).is_ok());
        assert_eq!(p.plan(&inc), Err(SynthesisError::RecheckBudgetExhausted));
    }

    #[test]
    fn aggregate_examples() {
        let fs = [
            finding(AgentRole::LegalInterpreter, 1, "a", RiskLevel::Low, &[]),
            finding(AgentRole::LegalInterpreter, 2, "b", RiskLevel::Medium, &["PIPL"]),
        ];
        assert_eq!(aggregate_risk(&fs, RiskLevel::High), RiskLevel::High);
        assert_eq!(aggregate_risk(&fs, RiskLevel::RedLine), RiskLevel::RedLine);
        assert_eq!(aggregate_risk(&[], RiskLevel::Low), RiskLevel::Low);
    }

    #[test]
    fn duplicates_merge_with_max_risk_and_union_citations() {
        let legal = finding(AgentRole::LegalInterpreter, 1, "consent", RiskLevel::High, &["PIPL Article 26"]);
        let mut checker = finding(AgentRole::RuleChecker, 1, "consent", RiskLevel::Medium, &[]);
        checker.basis.push(Citation::new("c", CitationKind::InternalRule, "Checklist Tier 2: Consent", 0.8).unwrap());
        let reports = vec![report(AgentRole::LegalInterpreter, vec![legal]), report(AgentRole::RuleChecker, vec![checker])];
        let c = consolidate(input(&reports, &[])).unwrap();
        assert_eq!(c.findings.len(), 1);
        let f = &c.findings[0];
        assert_eq!(f.finding.risk, RiskLevel::High);
        assert_eq!(c.citations_index["F1"].len(), 2);
        assert_eq!(f.contributors.len(), 2);
        assert!(c.is_grounded());
        // High finding without a plan gets an escalation action.
        assert!(c.mitigations.iter().any(|m| m.for_finding == "F1" && m.escalate));
        assert_eq!(c.overall_risk, RiskLevel::High);
    }

    #[test]
    fn uncited_medium_is_downgraded() {
        let mut f = finding(AgentRole::RuleChecker, 1, "x", RiskLevel::Low, &[]);
        f.risk = RiskLevel::Medium;
        let reports = vec![report(AgentRole::RuleChecker, vec![f])];
        let c = consolidate(input(&reports, &[])).unwrap();
        assert_eq!(c.findings[0].finding.risk, RiskLevel::Low);
        assert_eq!(c.findings[0].finding.unsupported_claim, Some(RiskLevel::Medium));
    }

    #[test]
    fn all_failed_is_an_error() {
        let reports: Vec<_> = AgentRole::ALL.iter().map(|r| AgentReport::failed(*r, 0, String::new(), "down")).collect();
        assert_eq!(consolidate(input(&reports, &[])).unwrap_err(), SynthesisError::NoUsableReports);
    }

    #[test]
    fn mitigations_follow_superseded_findings() {
        let old = finding(AgentRole::RuleChecker, 1, "consent", RiskLevel::Medium, &["PIPL"]);
        let mut new = finding(AgentRole::RuleChecker, 1, "consent", RiskLevel::High, &["PIPL"]);
        new.finding_id = "RC-r1-1".into();
        let mut plan = report(AgentRole::RiskPlanner, vec![]);
        plan.parsed = Some(ParsedReport::RiskPlan(RiskPlan {
            overall_risk: RiskLevel::Medium,
            mitigations: vec![MitigationAction {
                action_id: "RP-r0-m1".into(),
                for_finding: old.finding_id.clone(),
                topic: "consent".into(),
                text: "separate consent".into(),
                grade: RiskLevel::Medium,
                escalate: false,
                timeline_hint: None,
            }],
            launch_conditions: vec!["consent shipped".into()],
        }));
        let reports = vec![report(AgentRole::RuleChecker, vec![new]), plan];
        let superseded = [old];
        let c = consolidate(ConsolidationInput { superseded: &superseded, ..input(&reports, &[]) }).unwrap();
        assert_eq!(c.mitigations.len(), 1);
        assert_eq!(c.mitigations[0].for_finding, "F1");
        assert_eq!(c.mitigations[0].grade, RiskLevel::High);
        assert!(c.mitigations[0].escalate);
        assert_eq!(c.launch_conditions, vec!["consent shipped"]);
    }

    #[test]
    fn recheck_replaces_only_the_focused_issue() {
        let orig = report(
            AgentRole::RuleChecker,
            vec![
                finding(AgentRole::RuleChecker, 1, "consent", RiskLevel::High, &["PIPL Article 21"]),
                finding(AgentRole::RuleChecker, 2, "watermark", RiskLevel::Low, &[]),
            ],
        );
        let mut re = report(AgentRole::RuleChecker, vec![finding(AgentRole::RuleChecker, 1, "consent", RiskLevel::High, &["PIPL Article 26"])]);
        re.round = 1;
        let (updated, old) = apply_recheck(&orig, &re, "consent");
        assert_eq!(old.len(), 1);
        assert_eq!(updated.findings.len(), 2);
        assert!(updated.findings.iter().any(|f| f.basis.first().is_some_and(|c| c.locator == "PIPL Article 26")));
    }
}

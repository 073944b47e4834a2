//! Risk planner output: graded mitigation actions bound to earlier findings.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sections::{bullets, field, find_section, lines, split_sections, strip_marker};
use super::{Interpretation, ParseError};
use crate::domain::{issue_key_or_fallback, AgentRole, Finding, MitigationAction, RiskLevel};
use crate::text::content_tokens;

/// Share of a finding's key tokens a mitigation must mention to bind to it.
pub const BIND_CONTAINMENT: f64 = 0.6;

pub const GENERAL_ISSUE_KEY: &str = "general";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskPlan {
    pub overall_risk: RiskLevel,
    pub mitigations: Vec<MitigationAction>,
    pub launch_conditions: Vec<String>,
}

/// One numbered item of the mitigation section before binding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct RawAction {
    topic: String,
    text: String,
    grade: Option<RiskLevel>,
    escalate: bool,
    timeline: Option<String>,
}

const OVERALL: &[&str] = &["overall risk"];
const ACTIONS: &[&str] = &["mitigation"];
const LAUNCH: &[&str] = &["launch condition"];

fn yes(v: &str) -> bool {
    matches!(v.trim().to_lowercase().as_str(), "yes" | "y" | "true")
}

fn parse_actions(body: &[&str]) -> Vec<RawAction> {
    let mut out: Vec<RawAction> = Vec::new();
    for line in body {
        let trimmed = line.trim_start();
        let numbered = trimmed.chars().next().is_some_and(|c| c.is_ascii_digit()) && strip_marker(trimmed) != trimmed;
        if numbered {
            let item = strip_marker(trimmed);
            let topic = field(item, "Topic").unwrap_or(item).to_string();
            out.push(RawAction { topic, ..RawAction::default() });
            continue;
        }
        let Some(a) = out.last_mut() else { continue };
        if let Some(v) = field(line, "Topic") {
            a.topic = v.to_string();
        } else if let Some(v) = field(line, "Action") {
            a.text = v.to_string();
        } else if let Some(v) = field(line, "Grade") {
            a.grade = RiskLevel::from_text(v);
        } else if let Some(v) = field(line, "Escalate") {
            a.escalate = yes(v);
        } else if let Some(v) = field(line, "Timeline") {
            a.timeline = Some(v.to_string()).filter(|s| !s.is_empty());
        }
    }
    out
}

/// Prior finding a mitigation addresses: identical issue key, else the
/// finding whose key tokens are best covered (at least [`BIND_CONTAINMENT`])
/// by the mitigation's topic and text. Ties go to the earlier finding.
pub fn bind_finding<'a>(topic: &str, text: &str, prior: &'a [Finding]) -> Option<&'a Finding> {
    let key = issue_key_or_fallback(topic);
    if let Some(f) = prior.iter().find(|f| f.issue_key == key) {
        return Some(f);
    }
    let mentioned: BTreeSet<String> = content_tokens(&format!("{topic} {text}")).into_iter().collect();
    let mut best: Option<(f64, &Finding)> = None;
    for f in prior {
        let toks: Vec<&str> = f.issue_key.split('+').filter(|t| !t.is_empty()).collect();
        if toks.is_empty() {
            continue;
        }
        let hit = toks.iter().filter(|t| mentioned.contains(**t)).count() as f64 / toks.len() as f64;
        if hit >= BIND_CONTAINMENT && best.is_none_or(|(b, _)| hit > b) {
            best = Some((hit, f));
        }
    }
    best.map(|(_, f)| f)
}

/// Result of binding a plan against the findings it was asked to address.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPlan {
    pub plan: RiskPlan,
    /// The synthetic low-risk finding holding unbound mitigations, if any.
    pub general: Option<Finding>,
    /// Elevated prior findings without an escalating mitigation.
    pub unescalated: Vec<String>,
}

pub fn parse_risk_plan(raw: &str, prior: &[Finding], round: u32) -> Result<Interpretation<BoundPlan>, ParseError> {
    let all = lines(raw);
    let sections = split_sections(&all, 3);
    let overall = find_section(&sections, "1", OVERALL);
    let actions = find_section(&sections, "2", ACTIONS);
    let launch = find_section(&sections, "3", LAUNCH);
    if [overall, actions, launch].iter().all(Option::is_none) {
        return Err(ParseError::NoSectionsFound);
    }
    let mut problems = Vec::new();
    let overall_risk = overall.and_then(|s| s.body.iter().find_map(|l| RiskLevel::from_text(l)));
    if overall_risk.is_none() {
        problems.push("overall risk level not stated".to_string());
    }
    if actions.is_none() {
        problems.push("missing mitigation actions section".to_string());
    }
    let general_id = format!("{}-r{round}-general", AgentRole::RiskPlanner.code());
    let mut needs_general = false;
    let mut mitigations = Vec::new();
    for (i, a) in actions.map(|s| parse_actions(&s.body)).unwrap_or_default().into_iter().enumerate() {
        let bound = bind_finding(&a.topic, &a.text, prior);
        let (for_finding, finding_risk) = match bound {
            Some(f) => (f.finding_id.clone(), Some(f.risk)),
            None => {
                needs_general = true;
                (general_id.clone(), None)
            }
        };
        let grade = a.grade.or(finding_risk).unwrap_or(RiskLevel::Low);
        let mut m = MitigationAction {
            action_id: format!("{}-r{round}-m{}", AgentRole::RiskPlanner.code(), i + 1),
            for_finding,
            topic: a.topic,
            text: a.text,
            grade,
            escalate: a.escalate,
            timeline_hint: a.timeline,
        };
        m.regrade(grade);
        mitigations.push(m);
    }
    let launch_conditions = launch.map(|s| bullets(&s.body)).unwrap_or_default();

    // Findings sharing an issue key are one issue; one escalation covers them all.
    let escalated_keys: BTreeSet<&str> = mitigations
        .iter()
        .filter(|m| m.escalate)
        .filter_map(|m| prior.iter().find(|f| f.finding_id == m.for_finding))
        .map(|f| f.issue_key.as_str())
        .collect();
    let unescalated: Vec<String> = prior
        .iter()
        .filter(|f| f.risk >= RiskLevel::High)
        .filter(|f| !escalated_keys.contains(f.issue_key.as_str()))
        .map(|f| f.finding_id.clone())
        .collect();
    for id in &unescalated {
        problems.push(format!("no escalating mitigation for {id}"));
    }
    let general = needs_general.then(|| {
        Finding::grounded(
            general_id,
            GENERAL_ISSUE_KEY,
            "General mitigation items not tied to a specific finding",
            RiskLevel::Low,
            Vec::new(),
            AgentRole::RiskPlanner,
            round,
        )
    });
    Ok(Interpretation {
        value: BoundPlan {
            plan: RiskPlan { overall_risk: overall_risk.unwrap_or(RiskLevel::Low), mitigations, launch_conditions },
            general,
            unescalated,
        },
        problems,
    })
}

pub fn render_risk_plan(p: &RiskPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "### 1. Overall Risk Level\n{}\n", p.overall_risk.label());
    out.push_str("### 2. Mitigation Actions\n");
    for (i, m) in p.mitigations.iter().enumerate() {
        let _ = writeln!(out, "{}. Topic: {}", i + 1, m.topic);
        let _ = writeln!(out, "   - Action: {}", m.text);
        let _ = writeln!(out, "   - Grade: {}", m.grade.label());
        let _ = writeln!(out, "   - Escalate: {}", if m.escalate { "Yes" } else { "No" });
        if let Some(t) = &m.timeline_hint {
            let _ = writeln!(out, "   - Timeline: {t}");
        }
    }
    out.push_str("\n### 3. Launch Conditions\n");
    for c in &p.launch_conditions {
        let _ = writeln!(out, "- {c}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Citation, CitationKind};

    fn finding(id: &str, topic: &str, risk: RiskLevel) -> Finding {
        let c = Citation::new("s", CitationKind::Statute, "PIPL", 1.0).unwrap();
        Finding::grounded(id, topic, topic, risk, vec![c], AgentRole::LegalInterpreter, 0)
    }

    const PLAN: &str = "\
### 1. Overall Risk Level
High

### 2. Mitigation Actions
1. Topic: Consent
   - Action: Add a separate consent screen before the camera opens.
   - Grade: High
   - Escalate: Yes
   - Timeline: before launch
2. Topic: Staff training
   - Action: Train support staff.
   - Grade: Low
   - Escalate: No

### 3. Launch Conditions
- Consent screen shipped
";

    #[test]
    fn binds_by_issue_key_and_falls_back_to_general() {
        let prior = vec![finding("LI-r0-1", "consent", RiskLevel::High)];
        let r = parse_risk_plan(PLAN, &prior, 0).unwrap();
        assert!(r.problems.is_empty(), "{:?}", r.problems);
        let m = &r.value.plan.mitigations;
        assert_eq!(m[0].for_finding, "LI-r0-1");
        assert!(m[0].escalate);
        assert_eq!(m[1].for_finding, "RP-r0-general");
        let g = r.value.general.unwrap();
        assert_eq!((g.risk, g.issue_key.as_str()), (RiskLevel::Low, "general"));
    }

    #[test]
    fn token_containment_binding() {
        let prior = vec![finding("RC-r0-1", "Personal Information Consent", RiskLevel::Medium)];
        let f = bind_finding("Consent flow", "Redesign personal information consent", &prior);
        assert_eq!(f.map(|f| f.finding_id.as_str()), Some("RC-r0-1"));
        assert!(bind_finding("Watermarks", "Label generated images", &prior).is_none());
    }

    #[test]
    fn empty_plan_with_high_finding_is_flagged() {
        let prior = vec![finding("LI-r0-1", "consent", RiskLevel::High)];
        let raw = "### 1. Overall Risk Level\nHigh\n### 2. Mitigation Actions\n### 3. Launch Conditions\n";
        let r = parse_risk_plan(raw, &prior, 0).unwrap();
        assert_eq!(r.value.unescalated, vec!["LI-r0-1"]);
        assert!(!r.problems.is_empty());
    }

    #[test]
    fn high_grade_always_escalates() {
        let raw = "### 2. Mitigation Actions\n1. Topic: x\n   - Grade: High\n   - Escalate: No\n";
        let r = parse_risk_plan(raw, &[], 0).unwrap();
        assert!(r.value.plan.mitigations[0].escalate);
    }

    #[test]
    fn render_round_trips() {
        let prior = vec![finding("LI-r0-1", "consent", RiskLevel::High)];
        let v = parse_risk_plan(PLAN, &prior, 0).unwrap().value;
        let again = parse_risk_plan(&render_risk_plan(&v.plan), &prior, 0).unwrap().value;
        assert_eq!(again, v);
    }
}

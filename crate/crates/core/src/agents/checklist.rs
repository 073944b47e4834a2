//! Rule checker report: an overall verdict plus tiered review tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sections::{bullets, field, find_section, lines, split_sections, table_row};
use super::{Interpretation, ParseError};
use crate::domain::{AgentRole, Finding, RiskLevel};
use crate::rulebook::{extract_statute_locators, statute_locator, Rulebook, GENAI_MEASURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NeedsAttention,
}

impl CheckStatus {
    pub fn from_text(s: &str) -> Option<Self> {
        let t = s.trim().to_lowercase();
        if t.contains("attention") {
            Some(CheckStatus::NeedsAttention)
        } else if t.starts_with("fail") {
            Some(CheckStatus::Fail)
        } else if t.starts_with("pass") {
            Some(CheckStatus::Pass)
        } else {
            None
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "Pass",
            CheckStatus::Fail => "Fail",
            CheckStatus::NeedsAttention => "Needs Attention",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier1Row {
    pub item: String,
    pub status: CheckStatus,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tier2Row {
    pub item: String,
    pub status: CheckStatus,
    pub note: String,
    pub risk: RiskLevel,
    pub suggestion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistReport {
    pub overall: RiskLevel,
    pub core_summary: String,
    pub tier1: Vec<Tier1Row>,
    pub tier2: Vec<Tier2Row>,
    pub tier3_notes: Vec<String>,
}

impl ChecklistReport {
    pub fn has_red_line(&self) -> bool {
        self.tier1.iter().any(|r| r.status == CheckStatus::Fail)
    }

    /// Applies the tier-1 veto: any failed red-line item forces `RedLine`.
    pub fn enforce_veto(&mut self) {
        if self.has_red_line() {
            self.overall = RiskLevel::RedLine;
        }
    }
}

const OVERALL: &[&str] = &["overall risk"];
const DETAILS: &[&str] = &["checklist details", "review checklist"];

fn verdict(text: &str) -> Option<RiskLevel> {
    let lower = text.to_lowercase();
    if lower.contains("red line issue") || lower.trim() == "red line" {
        return Some(RiskLevel::RedLine);
    }
    RiskLevel::from_text(text)
}

fn is_header(cells: &[String]) -> bool {
    cells.first().is_some_and(|c| c.eq_ignore_ascii_case("review item"))
}

pub fn parse_checklist_report(raw: &str) -> Result<Interpretation<ChecklistReport>, ParseError> {
    let all = lines(raw);
    let sections = split_sections(&all, 3);
    let overall = find_section(&sections, "1", OVERALL);
    let details = find_section(&sections, "2", DETAILS);
    if overall.is_none() && details.is_none() {
        return Err(ParseError::NoSectionsFound);
    }
    let mut problems = Vec::new();

    let mut stated = None;
    let mut core_summary = String::new();
    match overall {
        Some(s) => {
            for line in &s.body {
                if let Some(v) = field(line, "Comprehensive Risk Level") {
                    stated = verdict(v);
                } else if let Some(v) = field(line, "Core Summary") {
                    core_summary = v.to_string();
                }
            }
            if stated.is_none() {
                problems.push("overall verdict not stated".to_string());
            }
        }
        None => problems.push("missing overall assessment section".to_string()),
    }

    let mut tier1 = Vec::new();
    let mut tier2 = Vec::new();
    let mut tier3_notes = Vec::new();
    match details {
        Some(s) => {
            for sub in split_sections(&s.body, 4) {
                let t = sub.title.to_lowercase();
                if t.contains("tier 1") || t.contains("red line") {
                    for cells in sub.body.iter().filter_map(|l| table_row(l)) {
                        if is_header(&cells) || cells.len() < 2 {
                            continue;
                        }
                        match CheckStatus::from_text(&cells[1]) {
                            Some(CheckStatus::NeedsAttention) | None => {
                                problems.push(format!("tier 1 row \"{}\" has no pass/fail status", cells[0]));
                            }
                            Some(status) => tier1.push(Tier1Row {
                                item: cells[0].clone(),
                                status,
                                note: cells.get(2).cloned().unwrap_or_default(),
                            }),
                        }
                    }
                } else if t.contains("tier 2") || t.contains("compliance review") {
                    for cells in sub.body.iter().filter_map(|l| table_row(l)) {
                        if is_header(&cells) || cells.len() < 2 {
                            continue;
                        }
                        let Some(status) = CheckStatus::from_text(&cells[1]) else {
                            problems.push(format!("tier 2 row \"{}\" has an unknown status", cells[0]));
                            continue;
                        };
                        let risk = cells.get(3).and_then(|c| RiskLevel::from_text(c)).unwrap_or(match status {
                            CheckStatus::Fail => RiskLevel::Medium,
                            _ => RiskLevel::Low,
                        });
                        tier2.push(Tier2Row {
                            item: cells[0].clone(),
                            status,
                            note: cells.get(2).cloned().unwrap_or_default(),
                            risk,
                            suggestion: cells.get(4).cloned().unwrap_or_default(),
                        });
                    }
                } else if t.contains("tier 3") || t.contains("beyond") {
                    for b in bullets(&sub.body) {
                        tier3_notes.push(b);
                    }
                    for cells in sub.body.iter().filter_map(|l| table_row(l)) {
                        if !is_header(&cells) {
                            tier3_notes.push(cells.join(" | "));
                        }
                    }
                }
            }
            if tier1.is_empty() && tier2.is_empty() {
                problems.push("no checklist rows found".to_string());
            }
        }
        None => problems.push("missing checklist details section".to_string()),
    }

    let mut report = ChecklistReport {
        overall: stated.unwrap_or(RiskLevel::Low),
        core_summary,
        tier1,
        tier2,
        tier3_notes,
    };
    report.enforce_veto();
    Ok(Interpretation { value: report, problems })
}

pub fn checklist_findings(report: &ChecklistReport, round: u32, rulebook: &Rulebook) -> Vec<Finding> {
    let code = AgentRole::RuleChecker.code();
    let mut out = Vec::new();
    for row in report.tier1.iter().filter(|r| r.status == CheckStatus::Fail) {
        let basis = vec![
            rulebook.statute_citation(&statute_locator(GENAI_MEASURES, 4)),
            rulebook.internal_citation(1, &row.item),
        ];
        out.push(Finding::grounded(
            format!("{code}-r{round}-{}", out.len() + 1),
            &row.item,
            if row.note.is_empty() { row.item.clone() } else { row.note.clone() },
            RiskLevel::RedLine,
            basis,
            AgentRole::RuleChecker,
            round,
        ));
    }
    for row in report.tier2.iter().filter(|r| r.status != CheckStatus::Pass) {
        let mut basis: Vec<_> = extract_statute_locators(&format!("{} {}", row.note, row.suggestion), None)
            .iter()
            .map(|l| rulebook.statute_citation(l))
            .collect();
        basis.push(rulebook.internal_citation(2, &row.item));
        out.push(Finding::grounded(
            format!("{code}-r{round}-{}", out.len() + 1),
            &row.item,
            if row.note.is_empty() { row.item.clone() } else { row.note.clone() },
            row.risk,
            basis,
            AgentRole::RuleChecker,
            round,
        ));
    }
    out
}

fn cell(s: &str) -> String {
    s.replace('|', "/")
}

pub fn render_checklist_report(r: &ChecklistReport) -> String {
    let mut out = String::from("### AI Application Compliance and Risk Review Report\n\n");
    let verdict = if r.overall == RiskLevel::RedLine { "Red Line Issues Exist" } else { r.overall.label() };
    let _ = writeln!(out, "### 1. Overall Risk Assessment and Core Summary");
    let _ = writeln!(out, "* Comprehensive Risk Level: {verdict}");
    let _ = writeln!(out, "* Core Summary: {}\n", r.core_summary);
    out.push_str("### 2. Three-Tier Review Checklist Details\n\n#### Tier 1: Red Line Review\n");
    out.push_str("| Review Item | Status | Findings & Description |\n");
    for row in &r.tier1 {
        let _ = writeln!(out, "| {} | {} | {} |", cell(&row.item), row.status.label(), cell(&row.note));
    }
    out.push_str("\n#### Tier 2: Compliance Review\n");
    out.push_str("| Review Item | Status | Findings & Description | Risk Level | Improvement Suggestions |\n");
    for row in &r.tier2 {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            cell(&row.item),
            row.status.label(),
            cell(&row.note),
            row.risk.label(),
            cell(&row.suggestion)
        );
    }
    if !r.tier3_notes.is_empty() {
        out.push_str("\n#### Tier 3: Beyond-the-Rules Review\n");
        for n in &r.tier3_notes {
            let _ = writeln!(out, "- {n}");
        }
    }
    out.push_str("\n### 3. Disclaimer\nInternal automated review; not legal advice.\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_rows(verdict: &str, tier1: &str, tier2: &str) -> String {
        format!(
            "### 1. Overall Risk Assessment and Core Summary\n* Comprehensive Risk Level: {verdict}\n* Core Summary: s\n\n\
             ### 2. Three-Tier Review Checklist Details\n#### Tier 1: Red Line Review\n\
             | Review Item | Status | Findings & Description |\n|---|---|---|\n{tier1}\n\
             #### Tier 2: Compliance Review\n\
             | Review Item | Status | Findings & Description | Risk Level | Improvement Suggestions |\n{tier2}\n"
        )
    }

    #[test]
    fn tier2_row_carries_its_risk() {
        let raw = with_rows(
            "High",
            "| Prohibited Content Generation | Pass | none |",
            "| AI Interaction Declaration | Fail | No AI conversation prompts found | High | Must add AI identity declaration |",
        );
        let r = parse_checklist_report(&raw).unwrap();
        assert!(r.problems.is_empty(), "{:?}", r.problems);
        let row = &r.value.tier2[0];
        assert_eq!(row.risk, RiskLevel::High);
        assert_eq!(row.status, CheckStatus::Fail);
        assert_eq!(row.suggestion, "Must add AI identity declaration");
    }

    #[test]
    fn red_line_verdict() {
        let raw = with_rows("Red Line Issues Exist", "| Prohibited Content Generation | Pass | ok |", "");
        assert_eq!(parse_checklist_report(&raw).unwrap().value.overall, RiskLevel::RedLine);
    }

    #[test]
    fn tier1_fail_overrides_stated_verdict() {
        let raw = with_rows("Low", "| False and Harmful Information | Fail | fabricated results |", "");
        let r = parse_checklist_report(&raw).unwrap().value;
        assert_eq!(r.overall, RiskLevel::RedLine);
        let f = checklist_findings(&r, 0, &Rulebook::seed());
        assert_eq!(f[0].risk, RiskLevel::RedLine);
        assert_eq!(f[0].basis[0].locator, "GenAI Interim Measures Article 4");
    }

    #[test]
    fn all_pass_low_passes_through() {
        let raw = with_rows("Low", "| Prohibited Content Generation | Pass | ok |", "| Algorithm Filing | Pass | filed | Low | None |");
        let r = parse_checklist_report(&raw).unwrap();
        assert_eq!(r.value.overall, RiskLevel::Low);
        assert!(checklist_findings(&r.value, 0, &Rulebook::seed()).is_empty());
    }

    #[test]
    fn statutes_in_notes_become_citations() {
        let raw = with_rows(
            "Medium",
            "| Prohibited Content Generation | Pass | ok |",
            "| User Choice Rights | Needs Attention | No opt-out (Algorithm Recommendation Regulations Article 21) | Medium | Add opt-out |",
        );
        let r = parse_checklist_report(&raw).unwrap().value;
        let f = checklist_findings(&r, 0, &Rulebook::seed());
        let locs: Vec<_> = f[0].basis.iter().map(|c| c.locator.as_str()).collect();
        assert_eq!(locs, ["Algorithm Recommendation Regulations Article 21", "Checklist Tier 2: User Choice Rights"]);
        assert_eq!(f[0].issue_key, "choice+rights+user");
    }

    #[test]
    fn render_round_trips() {
        let raw = with_rows(
            "High",
            "| Prohibited Content Generation | Pass | ok |",
            "| Personal Information Consent | Fail | bundled consent | High | separate popup |",
        );
        let v = parse_checklist_report(&raw).unwrap().value;
        assert_eq!(parse_checklist_report(&render_checklist_report(&v)).unwrap().value, v);
    }
}

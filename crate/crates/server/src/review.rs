//! Headless review output: a markdown report preceded by a JSON front block.
//!
//! ```text
//! ---
//! {"exit_code": 2, "overall_risk": "high", "report": {...}, ...}
//! ---
//! # Pre-review: <title>
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use roundtable_core::orchestrator::Answer;
use roundtable_core::{ConsolidatedReport, RiskLevel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_HIGH: i32 = 2;
pub const EXIT_RED_LINE: i32 = 3;
/// Usage or input validation error.
pub const EXIT_USAGE: i32 = 64;

pub fn exit_code(risk: RiskLevel) -> i32 {
    match risk {
        RiskLevel::Low | RiskLevel::Medium => EXIT_OK,
        RiskLevel::High => EXIT_HIGH,
        RiskLevel::RedLine => EXIT_RED_LINE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMatter {
    pub proposal_id: String,
    pub title: String,
    pub overall_risk: RiskLevel,
    pub exit_code: i32,
    pub report: ConsolidatedReport,
    #[serde(default)]
    pub answers: Vec<Answer>,
}

pub fn render(front: &FrontMatter) -> String {
    let r = &front.report;
    let mut out = String::from("---\n");
    out.push_str(&serde_json::to_string_pretty(front).expect("front matter serializes"));
    out.push_str("\n---\n");
    let _ = writeln!(out, "# Pre-review: {}\n", front.title);
    let _ = writeln!(out, "**Overall risk: {}**\n", r.overall_risk);
    let _ = writeln!(
        out,
        "Session `{}`, round {}, rulebook {}, generated {}.\n",
        r.session_id,
        r.round,
        r.rulebook_version,
        r.generated_at.to_rfc3339()
    );
    if !r.notices.is_empty() {
        out.push_str("## Notices\n\n");
        for n in &r.notices {
            let _ = writeln!(out, "- {n}");
        }
        out.push('\n');
    }
    if !r.summary.is_empty() {
        let _ = writeln!(out, "## Summary\n\n{}\n", r.summary.trim());
    }
    out.push_str("## Findings\n\n");
    for level in RiskLevel::ALL.iter().rev() {
        let group: Vec<_> = r.findings.iter().filter(|m| m.finding.risk == *level).collect();
        if group.is_empty() {
            continue;
        }
        let _ = writeln!(out, "### {level}\n");
        for m in group {
            let f = &m.finding;
            let who: Vec<_> = m.contributors.iter().map(|c| c.display_name()).collect();
            let _ = writeln!(out, "- **{}** `{}` ({}): {}", f.finding_id, f.issue_key, who.join(", "), f.description);
            for c in r.citations_index.get(&f.finding_id).into_iter().flatten() {
                match &c.url {
                    Some(url) => {
                        let _ = writeln!(out, "  - [{}]({url})", c.locator);
                    }
                    None => {
                        let _ = writeln!(out, "  - {}", c.locator);
                    }
                }
            }
        }
        out.push('\n');
    }
    if !r.mitigations.is_empty() {
        out.push_str("## Mitigations\n\n| Id | Finding | Grade | Escalate | Action | Timeline |\n| --- | --- | --- | --- | --- | --- |\n");
        for m in &r.mitigations {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                m.action_id,
                m.for_finding,
                m.grade,
                if m.escalate { "yes" } else { "no" },
                m.text.replace('|', "/"),
                m.timeline_hint.as_deref().unwrap_or("")
            );
        }
        out.push('\n');
    }
    if !r.inconsistencies.is_empty() {
        out.push_str("## Inconsistencies\n\n");
        for i in &r.inconsistencies {
            let agents: Vec<_> = i.agents.iter().map(|a| a.display_name()).collect();
            let status = if i.resolved { "resolved" } else { "unresolved" };
            let _ = writeln!(out, "- `{}` {:?} between {} ({status})", i.issue_key, i.kind, agents.join(" and "));
        }
        out.push('\n');
    }
    if !r.launch_conditions.is_empty() {
        out.push_str("## Launch conditions\n\n");
        for c in &r.launch_conditions {
            let _ = writeln!(out, "- {c}");
        }
        out.push('\n');
    }
    if !front.answers.is_empty() {
        out.push_str("## Questions\n\n");
        for a in &front.answers {
            let _ = writeln!(out, "**{}** ({})\n\n{}\n", a.question, a.role.display_name(), a.text.trim());
        }
    }
    out
}

/// Reads the JSON front block back out of a rendered review.
pub fn parse_front(text: &str) -> Option<FrontMatter> {
    let rest = text.strip_prefix("---\n")?;
    let end = rest.find("\n---\n")?;
    serde_json::from_str(&rest[..end]).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grades_map_to_exit_codes() {
        let codes: Vec<_> = RiskLevel::ALL.iter().map(|r| exit_code(*r)).collect();
        assert_eq!(codes, vec![0, 0, 2, 3]);
    }
}

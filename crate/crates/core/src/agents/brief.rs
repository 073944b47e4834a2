//! Precedent researcher brief: success and failure cases with source links.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sections::{field, find_section, lines, paragraph, split_sections, strip_marker, urls, Section};
use super::{Interpretation, ParseError};
use crate::domain::{AgentRole, Citation, CitationKind, Finding, RiskLevel};
use crate::retrieval::AuthorityTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecedentCase {
    pub name: String,
    pub summary: String,
    pub factors: Vec<String>,
    pub implications: Vec<String>,
    pub links: Vec<Citation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue: Option<String>,
}

impl PrecedentCase {
    /// A case without any source link cannot ground a finding.
    pub fn is_verified(&self) -> bool {
        !self.links.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Risk,
    Opportunity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trend {
    pub kind: TrendKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBrief {
    pub core_insight: String,
    pub success_cases: Vec<PrecedentCase>,
    pub failure_cases: Vec<PrecedentCase>,
    pub trends: Vec<Trend>,
}

const INSIGHT: &[&str] = &["core insight", "strategic warning"];
const SUCCESS: &[&str] = &["success blueprint", "positive precedent"];
const FAILURE: &[&str] = &["failure playbook", "cautionary"];
const TRENDS: &[&str] = &["emerging risk", "opportunities"];

pub fn web_citation(url: &str, table: &AuthorityTable) -> Citation {
    Citation {
        source_id: format!("web:{url}"),
        kind: CitationKind::WebSource,
        locator: url.to_string(),
        url: Some(url.to_string()),
        quote: None,
        authority: table.lookup_url(url),
        rulebook_version: None,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum ListField {
    None,
    Factors,
    Implications,
    Links,
}

fn parse_case(section: &Section<'_>, table: &AuthorityTable) -> PrecedentCase {
    let name = match section.title.split_once(':') {
        Some((head, rest)) if head.trim().to_lowercase().starts_with("case") => rest.trim().to_string(),
        _ => section.title.trim().to_string(),
    };
    let mut case = PrecedentCase {
        name,
        summary: String::new(),
        factors: Vec::new(),
        implications: Vec::new(),
        links: Vec::new(),
        risk: None,
        issue: None,
    };
    let mut link_urls: Vec<String> = Vec::new();
    let mut current = ListField::None;
    for line in &section.body {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(v) = field(line, "Summary") {
            case.summary = v.to_string();
            current = ListField::None;
        } else if field(line, "Key Success Factors (KSF)").is_some()
            || field(line, "Key Success Factors").is_some()
            || field(line, "Root Cause Analysis").is_some()
        {
            current = ListField::Factors;
        } else if field(line, "Implications for our organization").is_some() {
            current = ListField::Implications;
        } else if let Some(v) = field(line, "Source links").or_else(|| field(line, "Source link")) {
            link_urls.extend(urls(v));
            current = ListField::Links;
        } else if let Some(v) = field(line, "Risk Level") {
            case.risk = RiskLevel::from_text(v);
            current = ListField::None;
        } else if let Some(v) = field(line, "Issue") {
            case.issue = Some(v.to_string());
            current = ListField::None;
        } else {
            let item = strip_marker(line).to_string();
            match current {
                ListField::Factors if !item.is_empty() => case.factors.push(item),
                ListField::Implications if !item.is_empty() => case.implications.push(item),
                ListField::Links => link_urls.extend(urls(line)),
                _ => {}
            }
        }
    }
    link_urls.dedup();
    let mut seen = Vec::new();
    for u in link_urls {
        if !seen.contains(&u) {
            case.links.push(web_citation(&u, table));
            seen.push(u);
        }
    }
    case
}

pub fn parse_case_brief(raw: &str, table: &AuthorityTable) -> Result<Interpretation<CaseBrief>, ParseError> {
    let all = lines(raw);
    let sections = split_sections(&all, 3);
    let insight = find_section(&sections, "1", INSIGHT);
    let success = find_section(&sections, "2", SUCCESS);
    let failure = find_section(&sections, "3", FAILURE);
    let trends = find_section(&sections, "4", TRENDS);
    if [insight, success, failure, trends].iter().all(Option::is_none) {
        return Err(ParseError::NoSectionsFound);
    }
    let mut problems = Vec::new();
    let core_insight = insight.map(|s| paragraph(&s.body)).unwrap_or_default();
    if core_insight.is_empty() {
        problems.push("core insight missing".to_string());
    }
    let cases = |s: Option<&Section<'_>>| -> Vec<PrecedentCase> {
        s.map(|s| split_sections(&s.body, 4).iter().map(|c| parse_case(c, table)).collect())
            .unwrap_or_default()
    };
    let success_cases = cases(success);
    let failure_cases = cases(failure);
    if success.is_none() {
        problems.push("missing success cases section".to_string());
    }
    if failure.is_none() {
        problems.push("missing failure cases section".to_string());
    }
    let mut trend_list = Vec::new();
    if let Some(s) = trends {
        for line in &s.body {
            let item = strip_marker(line);
            let Some((label, text)) = item.split_once(':') else { continue };
            let label = label.to_lowercase();
            let kind = if label.contains("opportunit") {
                TrendKind::Opportunity
            } else if label.contains("risk") {
                TrendKind::Risk
            } else {
                continue;
            };
            trend_list.push(Trend { kind, text: text.trim().to_string() });
        }
    }
    Ok(Interpretation {
        value: CaseBrief { core_insight, success_cases, failure_cases, trends: trend_list },
        problems,
    })
}

/// Failure cases become findings; unverified cases are downgraded by the
/// grounding rule because they carry no citation.
pub fn brief_findings(brief: &CaseBrief, round: u32) -> Vec<Finding> {
    brief
        .failure_cases
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let topic = c.issue.clone().unwrap_or_else(|| c.name.clone());
            let description = if c.summary.is_empty() { c.name.clone() } else { c.summary.clone() };
            Finding::grounded(
                format!("{}-r{round}-{}", AgentRole::PrecedentResearcher.code(), i + 1),
                &topic,
                description,
                c.risk.unwrap_or(RiskLevel::Medium),
                c.links.clone(),
                AgentRole::PrecedentResearcher,
                round,
            )
        })
        .collect()
}

fn render_case(out: &mut String, n: usize, c: &PrecedentCase, factors_label: &str) {
    let _ = writeln!(out, "#### Case {n}: {}\n", c.name);
    let _ = writeln!(out, "* Summary: {}", c.summary);
    if let Some(issue) = &c.issue {
        let _ = writeln!(out, "* Issue: {issue}");
    }
    if let Some(risk) = c.risk {
        let _ = writeln!(out, "* Risk Level: {}", risk.label());
    }
    let _ = writeln!(out, "* {factors_label}:");
    for (i, f) in c.factors.iter().enumerate() {
        let _ = writeln!(out, "  {}. {f}", i + 1);
    }
    out.push_str("* Implications for our organization:\n");
    for imp in &c.implications {
        let _ = writeln!(out, "  - {imp}");
    }
    let links: Vec<&str> = c.links.iter().filter_map(|l| l.url.as_deref()).collect();
    let _ = writeln!(out, "* Source links: {}\n", links.join(" "));
}

pub fn render_case_brief(b: &CaseBrief) -> String {
    let mut out = String::from("### Market Case Intelligence Brief\n\n");
    let _ = writeln!(out, "### 1. Core Insights & Strategic Warning\n\n{}\n", b.core_insight);
    out.push_str("### 2. Success Blueprints: Positive Precedents\n\n");
    for (i, c) in b.success_cases.iter().enumerate() {
        render_case(&mut out, i + 1, c, "Key Success Factors (KSF)");
    }
    out.push_str("### 3. Failure Playbooks: Cautionary Tales\n\n");
    for (i, c) in b.failure_cases.iter().enumerate() {
        render_case(&mut out, i + 1, c, "Root Cause Analysis");
    }
    out.push_str("### 4. Emerging Risks & Opportunities\n\n");
    for (i, t) in b.trends.iter().enumerate() {
        let kind = match t.kind {
            TrendKind::Risk => "Risk",
            TrendKind::Opportunity => "Opportunity",
        };
        let _ = writeln!(out, "* Trend {} ({kind}): {}", i + 1, t.text);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
### Market Case Intelligence Brief

### 1. Core Insights & Strategic Warning

Biometric consent failures drive the largest penalties.

### 2. Success Blueprints: Positive Precedents

#### Case 1: Opt-in shade finder
* Summary: Explicit opt-in before camera use.
* Key Success Factors (KSF):
  1. Clear notice
* Implications for our organization:
  - Copy the consent flow
* Source links: https://www.reuters.com/a https://www.ftc.gov/b

### 3. Failure Playbooks: Cautionary Tales

#### Case 1: Try-on class action
* Summary: Face geometry captured without consent.
* Issue: Biometric consent
* Risk Level: High
* Root Cause Analysis:
  1. No written release
* Implications for our organization:
  - Obtain written consent
* Source links: https://www.classaction.org/x

#### Case 2: Rumoured recall
* Summary: Unconfirmed reports.
* Source links: none found

### 4. Emerging Risks & Opportunities

* Trend 1 (Risk): More biometric suits.
* Trend 2 (Opportunity): Privacy as a selling point.
";

    #[test]
    fn parses_cases_and_links() {
        let r = parse_case_brief(SAMPLE, &AuthorityTable::shipped()).unwrap();
        assert!(r.problems.is_empty(), "{:?}", r.problems);
        let b = r.value;
        assert_eq!(b.success_cases[0].links.len(), 2);
        assert_eq!(b.success_cases[0].links[1].authority, 0.9);
        assert_eq!(b.failure_cases.len(), 2);
        assert!(!b.failure_cases[1].is_verified());
        assert_eq!(b.trends[1].kind, TrendKind::Opportunity);

        let f = brief_findings(&b, 0);
        assert_eq!(f[0].risk, RiskLevel::High);
        assert_eq!(f[0].issue_key, "biometric+consent");
        assert_eq!(f[1].risk, RiskLevel::Low);
        assert_eq!(f[1].unsupported_claim, Some(RiskLevel::Medium));
    }

    #[test]
    fn prose_has_no_sections() {
        assert_eq!(
            parse_case_brief("no headings here", &AuthorityTable::shipped()).unwrap_err(),
            ParseError::NoSectionsFound
        );
    }

    #[test]
    fn render_round_trips() {
        let t = AuthorityTable::shipped();
        let v = parse_case_brief(SAMPLE, &t).unwrap().value;
        assert_eq!(parse_case_brief(&render_case_brief(&v), &t).unwrap().value, v);
    }
}

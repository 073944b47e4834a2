//! Legal interpreter report: five numbered sections with clause-level risk
//! items grouped by law.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sections::{bullets, field, find_section, lines, paragraph, split_sections, strip_marker};
use super::{Interpretation, ParseError};
use crate::domain::{AgentRole, Finding, RiskLevel};
use crate::rulebook::{extract_statute_locators, Rulebook, ALGOREC_REGULATIONS, GENAI_MEASURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawFamily {
    GenAiMeasures,
    AlgoRecRegulations,
    Other,
}

impl LawFamily {
    fn default_law(self) -> Option<&'static str> {
        match self {
            LawFamily::GenAiMeasures => Some(GENAI_MEASURES),
            LawFamily::AlgoRecRegulations => Some(ALGOREC_REGULATIONS),
            LawFamily::Other => None,
        }
    }

    fn heading(self) -> &'static str {
        match self {
            LawFamily::GenAiMeasures => {
                "2.1 Risks Related to Interim Measures for the Management of Generative AI Services"
            }
            LawFamily::AlgoRecRegulations => {
                "2.2 Risks Related to Internet Information Service Algorithm Recommendation Management Regulations"
            }
            LawFamily::Other => {
                "2.3 Other Related Risks (such as data security, personal information protection)"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseRisk {
    pub law: LawFamily,
    /// "Clause Citation" text, or the "Risk Category" text for other risks.
    pub clause_citation: String,
    pub interpretation: String,
    pub impact: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalReport {
    pub overall_risk: RiskLevel,
    pub core_summary: String,
    pub clause_risks: Vec<ClauseRisk>,
    pub path_recommendations: Vec<String>,
    pub attention_points: Vec<String>,
    pub disclaimer_present: bool,
}

const OVERALL: &[&str] = &["overall risk"];
const ANALYSIS: &[&str] = &["legal risk analysis", "core legal risk"];
const PATH: &[&str] = &["compliance path", "recommendation"];
const ATTENTION: &[&str] = &["points to note", "attention"];
const DISCLAIMER: &[&str] = &["disclaimer"];

fn subsection_family(title: &str, number: Option<&str>) -> LawFamily {
    let t = title.to_lowercase();
    if t.contains("generative ai") || t.contains("interim measures") || number == Some("2.1") {
        LawFamily::GenAiMeasures
    } else if t.contains("algorithm recommendation") || number == Some("2.2") {
        LawFamily::AlgoRecRegulations
    } else {
        LawFamily::Other
    }
}

pub fn parse_legal_report(raw: &str) -> Result<Interpretation<LegalReport>, ParseError> {
    let all = lines(raw);
    let sections = split_sections(&all, 3);
    let overall = find_section(&sections, "1", OVERALL);
    let analysis = find_section(&sections, "2", ANALYSIS);
    let path = find_section(&sections, "3", PATH);
    let attention = find_section(&sections, "4", ATTENTION);
    let disclaimer = find_section(&sections, "5", DISCLAIMER);
    if [overall, analysis, path, attention, disclaimer].iter().all(Option::is_none) {
        return Err(ParseError::NoSectionsFound);
    }
    let mut problems = Vec::new();

    let mut overall_risk = None;
    let mut core_summary = String::new();
    if let Some(s) = overall {
        for line in &s.body {
            if let Some(v) = field(line, "Core Risk Summary") {
                core_summary = v.to_string();
            } else if overall_risk.is_none() {
                overall_risk = RiskLevel::from_text(line);
            }
        }
    } else {
        problems.push("missing overall risk section".to_string());
    }
    if overall.is_some() && overall_risk.is_none() {
        problems.push("overall risk level not stated".to_string());
    }

    let mut clause_risks = Vec::new();
    match analysis {
        Some(s) => {
            for sub in split_sections(&s.body, 4) {
                let law = subsection_family(&sub.title, sub.number.as_deref());
                clause_risks.extend(parse_items(&sub.body, law));
            }
        }
        None => problems.push("missing legal risk analysis section".to_string()),
    }

    let path_recommendations = path.map(|s| bullets(&s.body)).unwrap_or_default();
    if path.is_none() {
        problems.push("missing compliance path section".to_string());
    }
    let attention_points = attention.map(|s| bullets(&s.body)).unwrap_or_default();
    if attention.is_none() {
        problems.push("missing points to note section".to_string());
    }
    let disclaimer_present = disclaimer.is_some_and(|s| !paragraph(&s.body).is_empty());
    if !disclaimer_present {
        problems.push("disclaimer missing".to_string());
    }

    Ok(Interpretation {
        value: LegalReport {
            overall_risk: overall_risk.unwrap_or(RiskLevel::Low),
            core_summary,
            clause_risks,
            path_recommendations,
            attention_points,
            disclaimer_present,
        },
        problems,
    })
}

fn parse_items(body: &[&str], law: LawFamily) -> Vec<ClauseRisk> {
    let mut out: Vec<ClauseRisk> = Vec::new();
    for line in body {
        let head = field(line, "Clause Citation").or_else(|| field(line, "Risk Category"));
        if let Some(c) = head {
            out.push(ClauseRisk {
                law,
                clause_citation: c.to_string(),
                interpretation: String::new(),
                impact: String::new(),
                risk: None,
                issue: None,
            });
            continue;
        }
        let Some(item) = out.last_mut() else { continue };
        if let Some(v) = field(line, "Risk Interpretation") {
            item.interpretation = v.to_string();
        } else if let Some(v) = field(line, "Potential Impact") {
            item.impact = v.to_string();
        } else if let Some(v) = field(line, "Risk Level") {
            item.risk = RiskLevel::from_text(v);
        } else if let Some(v) = field(line, "Issue") {
            item.issue = Some(v.to_string());
        } else if !line.trim().is_empty() {
            // Continuation of the most recent free-text field.
            let target = if item.impact.is_empty() { &mut item.interpretation } else { &mut item.impact };
            if !target.is_empty() {
                target.push(' ');
            }
            target.push_str(strip_marker(line));
        }
    }
    out
}

/// Topic of a clause risk: the explicit issue line, else the parenthetical
/// of an "Article X (Y)" citation, else the citation text itself.
pub fn clause_topic(c: &ClauseRisk) -> String {
    if let Some(issue) = c.issue.as_deref().filter(|s| !s.trim().is_empty()) {
        return issue.trim().to_string();
    }
    if let (Some(open), Some(close)) = (c.clause_citation.find('('), c.clause_citation.rfind(')')) {
        if open < close {
            let inner = c.clause_citation[open + 1..close].trim();
            if !inner.is_empty() {
                return inner.to_string();
            }
        }
    }
    c.clause_citation.trim().to_string()
}

pub fn legal_findings(report: &LegalReport, round: u32, rulebook: &Rulebook) -> Vec<Finding> {
    report
        .clause_risks
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let text = format!("{} {}", c.clause_citation, c.interpretation);
            let mut locators = extract_statute_locators(&c.clause_citation, c.law.default_law());
            if locators.is_empty() {
                locators = extract_statute_locators(&text, c.law.default_law());
            }
            let basis = locators.iter().map(|l| rulebook.statute_citation(l)).collect();
            let description = if c.interpretation.is_empty() {
                c.clause_citation.clone()
            } else {
                c.interpretation.clone()
            };
            Finding::grounded(
                format!("{}-r{round}-{}", AgentRole::LegalInterpreter.code(), i + 1),
                &clause_topic(c),
                description,
                c.risk.unwrap_or(report.overall_risk),
                basis,
                AgentRole::LegalInterpreter,
                round,
            )
        })
        .collect()
}

pub fn render_legal_report(r: &LegalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "### 1. Overall Risk Level Assessment\n{}", r.overall_risk.label());
    let _ = writeln!(out, "Core Risk Summary: {}\n", r.core_summary);
    out.push_str("### 2. Core Legal Risk Analysis\n\n");
    for law in [LawFamily::GenAiMeasures, LawFamily::AlgoRecRegulations, LawFamily::Other] {
        let items: Vec<_> = r.clause_risks.iter().filter(|c| c.law == law).collect();
        if items.is_empty() {
            continue;
        }
        let _ = writeln!(out, "#### {}", law.heading());
        for c in items {
            let label = if law == LawFamily::Other { "Risk Category" } else { "Clause Citation" };
            let _ = writeln!(out, "* {label}: {}", c.clause_citation);
            if let Some(issue) = &c.issue {
                let _ = writeln!(out, "- Issue: {issue}");
            }
            let _ = writeln!(out, "- Risk Interpretation: {}", c.interpretation);
            let _ = writeln!(out, "- Potential Impact: {}", c.impact);
            if let Some(risk) = c.risk {
                let _ = writeln!(out, "- Risk Level: {}", risk.label());
            }
        }
        out.push('\n');
    }
    out.push_str("### 3. Preliminary Compliance Path Recommendation\n");
    for p in &r.path_recommendations {
        let _ = writeln!(out, "- {p}");
    }
    out.push_str("\n### 4. Points to Note\n");
    for p in &r.attention_points {
        let _ = writeln!(out, "- {p}");
    }
    out.push_str("\n### 5. Disclaimer\n");
    if r.disclaimer_present {
        out.push_str(
            "This report is a preliminary automated assessment for internal reference only and is not legal advice.\n",
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
### 1. Overall Risk Level Assessment
High
Core Risk Summary: Facial images are processed without separate consent.

### 2. Core Legal Risk Analysis

#### 2.1 Risks Related to Interim Measures for the Management of Generative AI Services
* Clause Citation: Article 7 (Training Data Processing)
- Risk Interpretation: User photos may be reused for model training.
- Potential Impact: Suspension of the service.

#### 2.3 Other Related Risks (such as data security, personal information protection)
* Risk Category: Personal Information Protection Risk (Biometric Information)
- Risk Interpretation: Facial landmarks are sensitive personal information under PIPL Article 28.
- Potential Impact: Fines.
- Risk Level: High

### 3. Preliminary Compliance Path Recommendation
- Add a separate biometric consent step.

### 4. Points to Note
- Confirm retention period.

### 5. Disclaimer
Not legal advice.
";

    #[test]
    fn parses_the_template() {
        let r = parse_legal_report(SAMPLE).unwrap();
        assert!(r.problems.is_empty(), "{:?}", r.problems);
        let v = r.value;
        assert_eq!(v.overall_risk, RiskLevel::High);
        assert_eq!(v.clause_risks.len(), 2);
        assert_eq!(v.clause_risks[0].law, LawFamily::GenAiMeasures);
        assert_eq!(v.clause_risks[1].risk, Some(RiskLevel::High));
        assert!(v.disclaimer_present);

        let f = legal_findings(&v, 0, &Rulebook::seed());
        assert_eq!(f[0].basis[0].locator, "GenAI Interim Measures Article 7");
        assert_eq!(f[0].issue_key, "data+processing+training");
        assert_eq!(f[1].basis[0].locator, "PIPL Article 28");
        assert_eq!(f[1].issue_key, "biometric+information");
    }

    #[test]
    fn empty_bodies_parse_but_are_degraded() {
        let raw = "### 1. Overall Risk Level Assessment\n### 2. Core Legal Risk Analysis\n### 3. Preliminary Compliance Path Recommendation\n### 4. Points to Note\n### 5. Disclaimer\n";
        let r = parse_legal_report(raw).unwrap();
        assert!(!r.value.disclaimer_present);
        assert!(r.value.clause_risks.is_empty());
        assert!(r.problems.iter().any(|p| p.contains("disclaimer")));
    }

    #[test]
    fn prose_has_no_sections() {
        assert_eq!(parse_legal_report("just some prose").unwrap_err(), ParseError::NoSectionsFound);
    }

    #[test]
    fn render_round_trips() {
        let v = parse_legal_report(SAMPLE).unwrap().value;
        let again = parse_legal_report(&render_legal_report(&v)).unwrap();
        assert!(again.problems.is_empty());
        assert_eq!(again.value, v);
    }
}

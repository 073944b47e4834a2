//! Independent oracles and input generators for retrieval ranking and the
//! report parsers. Shared by the property tests and the acceptance harness.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::sample::select;

use roundtable_core::agents::{
    interpret, parse_case_brief, parse_checklist_report, parse_legal_report, parse_risk_plan,
};
use roundtable_core::retrieval::{
    score_source, AuthorityTable, QueryOrigin, ScoreWeights, ScoredSource, SearchQuery, SearchResult,
};
use roundtable_core::rulebook::Rulebook;
use roundtable_core::{AgentRole, Finding, RiskLevel};

/// Brute force: best-scoring entry per url (first on ties), threshold,
/// then repeated selection of the maximum by (score desc, url asc).
pub fn filter_merge_oracle(scored: &[ScoredSource], threshold: f64, cap: usize) -> Vec<ScoredSource> {
    let urls: BTreeSet<&str> = scored.iter().map(|s| s.result.url.as_str()).collect();
    let mut kept: Vec<ScoredSource> = urls
        .iter()
        .map(|u| {
            let group: Vec<&ScoredSource> = scored.iter().filter(|s| s.result.url == *u).collect();
            let max = group.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
            (*group.iter().find(|s| s.score == max).unwrap()).clone()
        })
        .filter(|s| s.score >= threshold)
        .collect();
    let mut out = Vec::new();
    while out.len() < cap && !kept.is_empty() {
        let mut best = 0;
        for i in 1..kept.len() {
            let (a, b) = (&kept[i], &kept[best]);
            if a.score > b.score || (a.score == b.score && a.result.url < b.result.url) {
                best = i;
            }
        }
        out.push(kept.remove(best));
    }
    out
}

/// Small url and score alphabets so duplicates and ties are common.
pub fn merge_instance() -> impl Strategy<Value = (Vec<ScoredSource>, f64, usize)> {
    let item = (0..12usize, 0..=20u32, 0..3usize).prop_map(|(u, s, t)| ScoredSource {
        result: SearchResult {
            title: format!("t{t}"),
            snippet: String::new(),
            url: format!("https://e{u}.example.com/p"),
            source_domain: format!("e{u}.example.com"),
        },
        similarity: 0.0,
        authority: 0.0,
        score: s as f64 / 20.0,
    });
    (vec(item, 0..40), 0..=20u32, 1..12usize).prop_map(|(v, t, cap)| (v, t as f64 / 20.0, cap))
}

const WORDS: &[&str] = &[
    "biometric", "consent", "facial", "retention", "minor", "advertising", "ranking", "privacy", "penalty",
    "settlement", "children", "recommendation", "skin", "beauty", "disclosure", "age",
];

const DOMAINS: &[&str] = &["ftc.gov", "courtlistener.com", "reuters.com", "law360.com", "example.com", "unknown.org"];

#[derive(Debug, Clone)]
pub struct MonotonePair {
    pub query: Vec<String>,
    pub doc: Vec<String>,
    pub extra: Vec<String>,
    pub domains: (String, String),
}

/// A result and a second one that adds query words and sits on a domain of
/// at least the same authority, so it must never score lower.
pub fn monotone_pair() -> impl Strategy<Value = MonotonePair> {
    let word = || select(WORDS).prop_map(str::to_string);
    (vec(word(), 1..6), vec(word(), 0..8), vec(word(), 0..3), select(DOMAINS), select(DOMAINS)).prop_map(
        |(query, doc, picks, d1, d2)| {
            let extra = picks.into_iter().filter(|w| query.contains(w)).collect();
            let table = AuthorityTable::shipped();
            let (lo, hi) = if table.lookup(d1) <= table.lookup(d2) { (d1, d2) } else { (d2, d1) };
            MonotonePair { query, doc, extra, domains: (lo.to_string(), hi.to_string()) }
        },
    )
}

fn word_jaccard(a: &[String], b: &[String]) -> f64 {
    let a: BTreeSet<&String> = a.iter().collect();
    let b: BTreeSet<&String> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(&b).count() as f64 / union as f64
    }
}

pub fn check_monotone(p: &MonotonePair, weights: ScoreWeights) -> Result<(), String> {
    let table = AuthorityTable::shipped();
    let query = SearchQuery::new(p.query.join(" "), QueryOrigin::RiskFlag, 0).map_err(|e| e.to_string())?;
    let mut richer = p.doc.clone();
    richer.extend(p.extra.iter().cloned());
    let a = SearchResult::new("", p.doc.join(" "), format!("https://www.{}/a", p.domains.0)).unwrap();
    let b = SearchResult::new("", richer.join(" "), format!("https://www.{}/b", p.domains.1)).unwrap();
    let (sa, sb) = (score_source(&a, &query, &table, weights), score_source(&b, &query, &table, weights));
    for (s, doc, domain) in [(&sa, &p.doc, &p.domains.0), (&sb, &richer, &p.domains.1)] {
        let sim = word_jaccard(&p.query, doc);
        let auth = table.lookup(domain);
        let expected = (weights.similarity * sim + weights.authority * auth).clamp(0.0, 1.0);
        if (s.similarity - sim).abs() > 1e-12 || (s.score - expected).abs() > 1e-12 {
            return Err(format!("score {s:?} differs from {expected} (similarity {sim}, authority {auth})"));
        }
    }
    if sb.score + 1e-12 < sa.score {
        return Err(format!("dominating source scored lower: {} < {}", sb.score, sa.score));
    }
    Ok(())
}

/// Template lines taken from the scenario scripts.
pub fn template_lines(scenarios: &Path) -> Vec<String> {
    let mut lines = BTreeSet::new();
    for entry in std::fs::read_dir(scenarios).unwrap().flatten() {
        let Ok(scripts) = std::fs::read_dir(entry.path().join("script")) else { continue };
        for f in scripts.flatten() {
            let text = std::fs::read_to_string(f.path()).unwrap_or_default();
            lines.extend(text.lines().map(str::to_string));
        }
    }
    lines.into_iter().collect()
}

/// Findings a risk plan can bind to.
pub fn prior_findings(scenarios: &Path) -> Vec<Finding> {
    let raw = std::fs::read_to_string(scenarios.join("tryon/script/legal_interpreter.md")).unwrap();
    interpret(AgentRole::LegalInterpreter, 0, raw, &[], &Rulebook::seed(), &AuthorityTable::shipped()).findings
}

const MARKERS: &[&str] = &[
    "###", "####", "#", "* ", "- ", "1. ", "|", "| --- |", "Risk Level:", "Issue:", "Grade:", "Escalate: Yes",
    "Topic:", "Red Line", "High", "Medium", "Low", "Fail", "Pass", "Tier 1", "Source links:", "https://",
    "Article", "PIPL Article 0", "Article 99999999999999999999", "\t", "\r\n", "", "é", "🙂", "\u{0}",
];

/// Random mixtures of real template lines, structural markers and noise.
pub fn parser_input(lines: Vec<String>) -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        4 => select(lines),
        2 => select(MARKERS).prop_map(str::to_string),
        1 => any::<String>(),
        1 => (select(MARKERS), "[ -~]{0,30}").prop_map(|(m, s)| format!("{m}{s}")),
    ];
    vec(piece, 0..60).prop_map(|v| v.join("\n"))
}

/// Runs every parser and the full interpretation on `raw`. Errors are
/// acceptable results; only a panic is a failure.
pub fn parse_all(raw: &str, prior: &[Finding]) -> Result<(), String> {
    let table = AuthorityTable::shipped();
    let rulebook = Rulebook::seed();
    catch_unwind(AssertUnwindSafe(|| {
        let _ = parse_legal_report(raw);
        let _ = parse_checklist_report(raw);
        let _ = parse_case_brief(raw, &table);
        let _ = parse_risk_plan(raw, prior, 0);
        for role in AgentRole::ALL {
            let report = interpret(role, 1, raw.to_string(), prior, &rulebook, &table);
            assert_eq!(report.role, role);
            for f in &report.findings {
                assert!(f.risk < RiskLevel::Medium || !f.basis.is_empty(), "ungrounded {f:?}");
            }
        }
    }))
    .map_err(|p| {
        p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
    })
}

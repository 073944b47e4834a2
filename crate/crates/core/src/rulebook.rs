//! Versioned rulebook of statutes and internal checklist rules.
//!
//! Entries carry locator strings only. Agents cite statutes as
//! `"<Law> Article N"`; [`statute_locator`] and [`find_law`] produce that form
//! from free text so the same clause cited by two agents compares equal.

use serde::{Deserialize, Serialize};

use crate::domain::{Citation, CitationKind};

pub const SEED_VERSION: &str = "2025-01-01.1";

/// Authority attached to statute and internal-rule citations.
pub const STATUTE_AUTHORITY: f64 = 1.0;
pub const INTERNAL_RULE_AUTHORITY: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub rule_id: String,
    pub title: String,
    pub locator: String,
    pub text: String,
    pub authority: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rulebook {
    pub version: String,
    pub entries: Vec<RuleEntry>,
}

/// Canonical law names and the lowercase aliases that identify them in text.
/// Longer aliases come first so "personal information protection law" wins
/// over shorter overlapping forms.
pub const LAW_ALIASES: &[(&str, &[&str])] = &[
    (
        "GenAI Interim Measures",
        &[
            "interim measures for the management of generative ai services",
            "interim measures for the management of generative artificial intelligence services",
            "generative ai interim measures",
            "genai interim measures",
            "interim measures",
            "genai measures",
        ],
    ),
    (
        "Algorithm Recommendation Regulations",
        &[
            "internet information service algorithm recommendation management regulations",
            "algorithm recommendation management regulations",
            "algorithm recommendation regulations",
            "algorithmic recommendation",
            "algorithm recommendation",
        ],
    ),
    ("PIPL", &["personal information protection law", "pipl"]),
    ("Cybersecurity Law", &["cybersecurity law"]),
    ("Data Security Law", &["data security law"]),
    ("GDPR", &["general data protection regulation", "gdpr"]),
    ("BIPA", &["biometric information privacy act", "bipa"]),
];

pub const GENAI_MEASURES: &str = "GenAI Interim Measures";
pub const ALGOREC_REGULATIONS: &str = "Algorithm Recommendation Regulations";

/// Checklist items reviewed by the rule checker, by tier.
pub const TIER1_ITEMS: &[&str] = &[
    "Prohibited Content Generation",
    "Subversion or Extremism",
    "Violence or Pornography",
    "False and Harmful Information",
];

pub const TIER2_ITEMS: &[&str] = &[
    "Algorithm Filing",
    "Content Identification",
    "AI Interaction Declaration",
    "Anti-discrimination Measures",
    "Personal Information Consent",
    "User Choice Rights",
    "Minor Protection",
];

pub fn statute_locator(law: &str, article: u32) -> String {
    format!("{law} Article {article}")
}

/// Canonical law name whose alias occurs in `text` closest to byte offset
/// `near` (the end of the alias counts), or `None` if no alias occurs.
pub fn find_law(text: &str, near: usize) -> Option<&'static str> {
    let lower = text.to_lowercase();
    let mut best: Option<(usize, &'static str)> = None;
    for (law, aliases) in LAW_ALIASES {
        for alias in *aliases {
            for (start, _) in lower.match_indices(alias) {
                if !is_word_boundary(&lower, start, start + alias.len()) {
                    continue;
                }
                let end = start + alias.len();
                let dist = near.saturating_sub(end).max(start.saturating_sub(near));
                if best.is_none_or(|(d, _)| dist < d) {
                    best = Some((dist, law));
                }
            }
        }
    }
    best.map(|(_, law)| law)
}

fn is_word_boundary(s: &str, start: usize, end: usize) -> bool {
    let before = s[..start].chars().next_back();
    let after = s[end..].chars().next();
    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
}

fn article_re() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| regex::Regex::new(r"(?i)\b(?:article|art\.)\s*(\d+)").expect("valid regex"))
}

/// Statute locators cited in `text`.
///
/// Each "Article N" mention is attributed to the nearest law alias, falling
/// back to `default_law`; mentions with neither are skipped. Laws named
/// without any article become bare law locators. Order of first appearance,
/// deduplicated.
pub fn extract_statute_locators(text: &str, default_law: Option<&str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |loc: String| {
        if !out.contains(&loc) {
            out.push(loc);
        }
    };
    let mut any_article = false;
    for cap in article_re().captures_iter(text) {
        let m = cap.get(0).expect("whole match");
        let Ok(n) = cap[1].parse::<u32>() else { continue };
        let law = find_law(text, m.start()).or(default_law);
        if let Some(law) = law {
            any_article = true;
            push(statute_locator(law, n));
        }
    }
    if !any_article {
        for law in mentioned_laws(text) {
            push(law.to_string());
        }
    }
    out
}

/// Canonical names of every law mentioned in `text`, in order of appearance.
pub fn mentioned_laws(text: &str) -> Vec<&'static str> {
    let lower = text.to_lowercase();
    let mut hits: Vec<(usize, &'static str)> = Vec::new();
    for (law, aliases) in LAW_ALIASES {
        let first = aliases
            .iter()
            .flat_map(|a| lower.match_indices(a).map(move |(i, _)| (i, a.len())))
            .filter(|(i, len)| is_word_boundary(&lower, *i, i + len))
            .map(|(i, _)| i)
            .min();
        if let Some(i) = first {
            hits.push((i, law));
        }
    }
    hits.sort();
    hits.into_iter().map(|(_, l)| l).collect()
}

impl Rulebook {
    pub fn seed() -> Self {
        let mut entries = Vec::new();
        let mut statute = |id: &str, title: &str, locator: String| {
            entries.push(RuleEntry {
                rule_id: id.to_string(),
                title: title.to_string(),
                text: String::new(),
                locator,
                authority: STATUTE_AUTHORITY,
            });
        };
        statute(
            "genai-4",
            "Prohibited content",
            statute_locator(GENAI_MEASURES, 4),
        );
        statute(
            "genai-7",
            "Training data processing",
            statute_locator(GENAI_MEASURES, 7),
        );
        statute(
            "algorec",
            "Algorithm recommendation services",
            ALGOREC_REGULATIONS.to_string(),
        );
        statute("pipl", "Personal information protection", "PIPL".to_string());
        statute(
            "pipl-26",
            "Image collection in public places",
            statute_locator("PIPL", 26),
        );
        statute("csl", "Network security", "Cybersecurity Law".to_string());
        statute("dsl", "Data security", "Data Security Law".to_string());
        statute("gdpr", "EU data protection", "GDPR".to_string());
        statute("bipa", "Biometric privacy (Illinois)", "BIPA".to_string());
        for (tier, items) in [(1, TIER1_ITEMS), (2, TIER2_ITEMS)] {
            for item in items {
                entries.push(RuleEntry {
                    rule_id: format!("checklist-t{tier}-{}", crate::text::tokens(item).join("-")),
                    title: item.to_string(),
                    locator: checklist_locator(tier, item),
                    text: String::new(),
                    authority: INTERNAL_RULE_AUTHORITY,
                });
            }
        }
        Rulebook { version: SEED_VERSION.to_string(), entries }
    }

    /// Statute citation pinned to this rulebook version.
    pub fn statute_citation(&self, locator: &str) -> Citation {
        let source_id = self
            .entries
            .iter()
            .find(|e| e.locator == locator)
            .map(|e| e.rule_id.clone())
            .unwrap_or_else(|| format!("statute:{locator}"));
        Citation::new(source_id, CitationKind::Statute, locator, STATUTE_AUTHORITY)
            .expect("statute locators are non-empty")
            .with_rulebook_version(&self.version)
    }

    pub fn internal_citation(&self, tier: u8, item: &str) -> Citation {
        let locator = checklist_locator(tier, item);
        let source_id = self
            .entries
            .iter()
            .find(|e| e.locator.eq_ignore_ascii_case(&locator))
            .map(|e| e.rule_id.clone())
            .unwrap_or_else(|| format!("checklist:{locator}"));
        Citation::new(source_id, CitationKind::InternalRule, locator, INTERNAL_RULE_AUTHORITY)
            .expect("checklist locators are non-empty")
            .with_rulebook_version(&self.version)
    }
}

pub fn checklist_locator(tier: u8, item: &str) -> String {
    format!("Checklist Tier {tier}: {}", item.trim())
}

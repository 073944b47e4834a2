use std::collections::BTreeSet;

use crate::llm::{complete_text, ChatMessage, ChatProvider, ChatRequest};
use crate::text::{content_tokens, tokens};

use super::{QueryOrigin, RetrievalError, SearchQuery, MAX_QUERY_CHARS};

pub const KEYWORDS_PROMPT: &str = include_str!("../../resources/prompts/keyword_expansion.md");

/// Risk flag and the terms that raise it when found in a proposal.
const RISK_LEXICON: &[(&str, &[&str])] = &[
    ("biometric", &["biometric", "facial", "face", "landmark", "fingerprint", "iris", "voiceprint", "face scan"]),
    ("personal information", &["photo", "photos", "selfie", "selfies", "upload", "location", "personal data", "personal information"]),
    ("health claims", &["diagnosis", "diagnose", "diagnostic", "acne", "dermatology", "dermatologist", "medical", "skin condition"]),
    ("algorithmic discrimination", &["skin tone", "ethnicity", "age prediction", "predicts age", "bias", "ranking", "scoring"]),
    ("generated content labeling", &["generative", "generated", "synthetic", "virtual try on", "avatar", "render"]),
    ("minors", &["minor", "minors", "children", "child", "teen", "teens", "teenagers", "students"]),
    ("recommendation algorithm", &["recommend", "recommends", "recommendation", "recommendations", "personalized", "personalised", "feed"]),
    ("cross-border transfer", &["cross border", "overseas", "abroad", "global servers"]),
];

/// Static risk flags raised by the wording of a proposal, in lexicon order.
pub fn risk_flags(text: &str) -> Vec<String> {
    let toks = tokens(text);
    let joined = format!(" {} ", toks.join(" "));
    RISK_LEXICON
        .iter()
        .filter(|(_, terms)| {
            terms.iter().any(|t| joined.contains(&format!(" {} ", tokens(t).join(" "))))
        })
        .map(|(flag, _)| flag.to_string())
        .collect()
}

fn dedup_flags(flags: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    flags
        .iter()
        .map(|f| f.trim())
        .filter(|f| !f.is_empty() && seen.insert(f.to_lowercase()))
        .map(str::to_string)
        .collect()
}

fn clean_line(line: &str) -> String {
    let mut s = line.trim();
    s = s.trim_start_matches(|c: char| c == '-' || c == '*' || c == '•' || c.is_ascii_digit() || c == '.' || c == ')');
    s.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim().to_string()
}

fn truncate_chars(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

/// Search queries for a scenario and its risk flags.
///
/// One LLM call proposes queries; lines that share no concept token with the
/// scenario are dropped. If nothing survives, queries are built from the
/// scenario's own concept tokens.
pub async fn expand_keywords(
    scenario: &str,
    risk_flags: &[String],
    round: u32,
    max_queries: usize,
    provider: &dyn ChatProvider,
) -> Result<Vec<SearchQuery>, RetrievalError> {
    if scenario.trim().is_empty() {
        return Err(RetrievalError::EmptyScenario);
    }
    let flags = dedup_flags(risk_flags);
    let mut user = format!("Scenario:\n{}\n\nRisk flags:\n", scenario.trim());
    if flags.is_empty() {
        user.push_str("(none)\n");
    }
    for f in &flags {
        user.push_str(&format!("- {f}\n"));
    }
    let req = ChatRequest::new(
        format!("keywords:r{round}"),
        vec![ChatMessage::system(KEYWORDS_PROMPT), ChatMessage::user(user)],
    );
    let reply = complete_text(provider, &req).await?;

    let concepts: BTreeSet<String> = content_tokens(scenario).into_iter().collect();
    let flag_tokens: BTreeSet<String> = flags.iter().flat_map(|f| content_tokens(f)).collect();
    let accept = |cands: Vec<String>| -> Result<Vec<SearchQuery>, RetrievalError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for cand in cands {
            let text = truncate_chars(cand.trim(), MAX_QUERY_CHARS);
            let toks = tokens(&text);
            if !toks.iter().any(|t| concepts.contains(t)) || !seen.insert(toks.join(" ")) {
                continue;
            }
            let origin = if toks.iter().any(|t| flag_tokens.contains(t)) {
                QueryOrigin::RiskFlag
            } else {
                QueryOrigin::ScenarioExpansion
            };
            out.push(SearchQuery::new(text, origin, round)?);
            if out.len() == max_queries {
                break;
            }
        }
        Ok(out)
    };
    let out = accept(reply.lines().map(clean_line).collect())?;
    if !out.is_empty() {
        return Ok(out);
    }
    accept(fallback_queries(scenario, &flags))
}

fn fallback_queries(scenario: &str, flags: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let concepts: Vec<String> =
        content_tokens(scenario).into_iter().filter(|t| seen.insert(t.clone())).take(3).collect();
    let base = concepts.join(" ");
    let mut out = vec![base.clone()];
    out.extend(flags.iter().map(|f| format!("{base} {f}")));
    out
}

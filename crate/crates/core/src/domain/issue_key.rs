use std::collections::BTreeMap;

use super::DomainError;
use crate::text::content_tokens;

/// Number of tokens kept in an issue key.
pub const ISSUE_KEY_TOKENS: usize = 5;

/// Builds the cross-agent matching key for a finding description.
///
/// Lowercases, strips punctuation, drops stopwords, keeps the five most
/// frequent tokens (ties broken alphabetically), sorts them and joins with `+`.
pub fn normalize_issue_key(description: &str) -> Result<String, DomainError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for token in content_tokens(description) {
        *counts.entry(token).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(DomainError::EmptyDescription);
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    // BTreeMap iteration is alphabetical, and the sort is stable.
    ranked.sort_by_key(|e| std::cmp::Reverse(e.1));
    let mut kept: Vec<String> = ranked
        .into_iter()
        .take(ISSUE_KEY_TOKENS)
        .map(|(t, _)| t)
        .collect();
    kept.sort();
    Ok(kept.join("+"))
}

/// [`normalize_issue_key`], falling back to the trimmed lowercase description.
pub fn issue_key_or_fallback(description: &str) -> String {
    normalize_issue_key(description).unwrap_or_else(|_| description.trim().to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biometric_example() {
        assert_eq!(
            normalize_issue_key("Biometric facial data consent missing").unwrap(),
            "biometric+consent+data+facial+missing"
        );
    }

    #[test]
    fn empty_and_stopword_only_inputs_are_rejected() {
        assert_eq!(normalize_issue_key(""), Err(DomainError::EmptyDescription));
        assert_eq!(normalize_issue_key("  of the and "), Err(DomainError::EmptyDescription));
        assert_eq!(issue_key_or_fallback(" Of The "), "of the");
    }

    #[test]
    fn casing_and_punctuation_do_not_matter() {
        assert_eq!(
            normalize_issue_key("Consent, for FACIAL data!").unwrap(),
            normalize_issue_key("consent for facial data").unwrap()
        );
    }

    #[test]
    fn frequency_then_alphabet_selects_tokens() {
        // "zeta" appears twice, so it survives over alphabetically earlier singletons.
        let key = normalize_issue_key("zeta zeta alpha beta gamma delta epsilon").unwrap();
        assert_eq!(key, "alpha+beta+delta+epsilon+zeta");
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

/// The four seats at the review table. There is no fifth role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    LegalInterpreter,
    RuleChecker,
    PrecedentResearcher,
    RiskPlanner,
}

impl AgentRole {
    pub const ALL: [AgentRole; 4] = [
        AgentRole::LegalInterpreter,
        AgentRole::RuleChecker,
        AgentRole::PrecedentResearcher,
        AgentRole::RiskPlanner,
    ];

    /// Roles activated on a timer when a session starts, in activation order.
    pub const FIRST_WAVE: [AgentRole; 3] = [
        AgentRole::LegalInterpreter,
        AgentRole::RuleChecker,
        AgentRole::PrecedentResearcher,
    ];

    /// Short code used in finding and fixture identifiers.
    pub fn code(self) -> &'static str {
        match self {
            AgentRole::LegalInterpreter => "LI",
            AgentRole::RuleChecker => "RC",
            AgentRole::PrecedentResearcher => "PR",
            AgentRole::RiskPlanner => "RP",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            AgentRole::LegalInterpreter => "legal_interpreter",
            AgentRole::RuleChecker => "rule_checker",
            AgentRole::PrecedentResearcher => "precedent_researcher",
            AgentRole::RiskPlanner => "risk_planner",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            AgentRole::LegalInterpreter => "Legal Interpreter",
            AgentRole::RuleChecker => "Rule Checker",
            AgentRole::PrecedentResearcher => "Precedent Researcher",
            AgentRole::RiskPlanner => "Risk Planner",
        }
    }

    pub fn from_slug(s: &str) -> Option<AgentRole> {
        AgentRole::ALL.into_iter().find(|r| r.slug() == s)
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Ordinal severity. `RedLine` sits above `High` and acts as a veto.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    #[default]
    Low,
    Medium,
    High,
    RedLine,
}

impl RiskLevel {
    pub const ALL: [RiskLevel; 4] = [
        RiskLevel::Low,
        RiskLevel::Medium,
        RiskLevel::High,
        RiskLevel::RedLine,
    ];

    pub fn rank(self) -> u8 {
        self as u8
    }

    /// Number of order steps between two levels.
    pub fn steps_between(self, other: RiskLevel) -> u8 {
        self.rank().abs_diff(other.rank())
    }

    pub fn is_elevated(self) -> bool {
        self >= RiskLevel::Medium
    }

    /// Maps free text such as "High", "medium risk" or "Red Line Issues Exist".
    ///
    /// The earliest keyword in the text wins, so "High / Medium / Low" reads as High.
    pub fn from_text(text: &str) -> Option<RiskLevel> {
        let lower = text.to_lowercase();
        let candidates = [
            ("red line", RiskLevel::RedLine),
            ("red-line", RiskLevel::RedLine),
            ("redline", RiskLevel::RedLine),
            ("high", RiskLevel::High),
            ("medium", RiskLevel::Medium),
            ("moderate", RiskLevel::Medium),
            ("low", RiskLevel::Low),
        ];
        candidates
            .iter()
            .filter_map(|(kw, level)| find_word(&lower, kw).map(|pos| (pos, *level)))
            .min_by_key(|(pos, _)| *pos)
            .map(|(_, level)| level)
    }

    pub fn label(self) -> &'static str {
        match self {
            RiskLevel::Low => "Low",
            RiskLevel::Medium => "Medium",
            RiskLevel::High => "High",
            RiskLevel::RedLine => "Red Line",
        }
    }
}

fn find_word(haystack: &str, needle: &str) -> Option<usize> {
    let bytes = haystack.as_bytes();
    let mut from = 0;
    while let Some(off) = haystack[from..].find(needle) {
        let start = from + off;
        let end = start + needle.len();
        let before_ok = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
        let after_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if before_ok && after_ok {
            return Some(start);
        }
        from = end;
    }
    None
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-round lifecycle of one agent seat.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    #[default]
    Idle,
    Thinking,
    Speaking,
    Completed,
    Failed,
}

impl AgentStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, AgentStatus::Completed | AgentStatus::Failed)
    }

    /// Idle→Thinking→Speaking→Completed, any non-terminal state may fail.
    pub fn can_transition_to(self, next: AgentStatus) -> bool {
        use AgentStatus::*;
        match (self, next) {
            (Idle, Thinking) | (Thinking, Speaking) | (Speaking, Completed) => true,
            (from, Failed) => !from.is_terminal(),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_max_is_associative_commutative_idempotent() {
        for a in RiskLevel::ALL {
            assert_eq!(a.max(a), a);
            for b in RiskLevel::ALL {
                assert_eq!(a.max(b), b.max(a));
                for c in RiskLevel::ALL {
                    assert_eq!(a.max(b).max(c), a.max(b.max(c)));
                }
            }
        }
    }

    #[test]
    fn risk_from_text_handles_template_phrases() {
        assert_eq!(RiskLevel::from_text("Red Line Issues Exist"), Some(RiskLevel::RedLine));
        assert_eq!(RiskLevel::from_text("HIGH"), Some(RiskLevel::High));
        assert_eq!(RiskLevel::from_text("Overall: medium risk"), Some(RiskLevel::Medium));
        assert_eq!(RiskLevel::from_text("High / Medium / Low"), Some(RiskLevel::High));
        assert_eq!(RiskLevel::from_text("highlight the lowdown"), None);
        assert_eq!(RiskLevel::from_text(""), None);
    }

    #[test]
    fn status_transitions() {
        use AgentStatus::*;
        assert!(Idle.can_transition_to(Thinking));
        assert!(Thinking.can_transition_to(Speaking));
        assert!(Speaking.can_transition_to(Completed));
        assert!(Idle.can_transition_to(Failed));
        assert!(Speaking.can_transition_to(Failed));
        assert!(!Idle.can_transition_to(Speaking));
        assert!(!Thinking.can_transition_to(Completed));
        for next in [Idle, Thinking, Speaking, Completed, Failed] {
            assert!(!Completed.can_transition_to(next));
            assert!(!Failed.can_transition_to(next));
        }
    }

    #[test]
    fn role_slugs_round_trip() {
        for role in AgentRole::ALL {
            assert_eq!(AgentRole::from_slug(role.slug()), Some(role));
            let json = serde_json::to_string(&role).unwrap();
            assert_eq!(json, format!("\"{}\"", role.slug()));
        }
    }
}

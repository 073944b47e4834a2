//! Keyword routing of follow-up questions to one seat at the table.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::domain::AgentRole;
use crate::text::tokens;

const SHIPPED: &str = include_str!("../resources/routing.toml");

pub const PHRASE_WEIGHT: u32 = 2;
pub const WORD_WEIGHT: u32 = 1;

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("cannot read routing table: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed routing table: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown role {0:?} in routing table")]
    UnknownRole(String),
    #[error("term {term:?} is listed for both {a} and {b}")]
    Overlap { term: String, a: AgentRole, b: AgentRole },
    #[error("empty term under {0}")]
    EmptyTerm(AgentRole),
}

#[derive(Deserialize)]
struct RawTable {
    default_role: Option<String>,
    lexicons: BTreeMap<String, Vec<String>>,
}

/// Per-role term lists, each term stored as its case-folded token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTable {
    lexicons: BTreeMap<AgentRole, BTreeSet<Vec<String>>>,
    default_role: AgentRole,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub role: AgentRole,
    pub score: u32,
    /// Matched terms of the winning role, sorted.
    pub matched: Vec<String>,
}

impl RoutingTable {
    pub fn new(lexicons: BTreeMap<AgentRole, Vec<String>>, default_role: AgentRole) -> Result<Self, RoutingError> {
        let mut owner: BTreeMap<Vec<String>, AgentRole> = BTreeMap::new();
        let mut out: BTreeMap<AgentRole, BTreeSet<Vec<String>>> = BTreeMap::new();
        for (role, terms) in lexicons {
            let set = out.entry(role).or_default();
            for term in terms {
                let toks = tokens(&term);
                if toks.is_empty() {
                    return Err(RoutingError::EmptyTerm(role));
                }
                if let Some(prev) = owner.get(&toks).filter(|r| **r != role) {
                    return Err(RoutingError::Overlap { term: toks.join(" "), a: *prev, b: role });
                }
                owner.insert(toks.clone(), role);
                set.insert(toks);
            }
        }
        Ok(Self { lexicons: out, default_role })
    }

    pub fn from_toml(text: &str) -> Result<Self, RoutingError> {
        let raw: RawTable = toml::from_str(text)?;
        let role = |s: &str| AgentRole::from_slug(s).ok_or_else(|| RoutingError::UnknownRole(s.to_string()));
        let default_role = raw.default_role.as_deref().map(role).transpose()?.unwrap_or(AgentRole::RiskPlanner);
        let mut lexicons = BTreeMap::new();
        for (k, v) in raw.lexicons {
            lexicons.insert(role(&k)?, v);
        }
        Self::new(lexicons, default_role)
    }

    pub fn load(path: &Path) -> Result<Self, RoutingError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED).expect("shipped routing table is valid")
    }

    pub fn default_role(&self) -> AgentRole {
        self.default_role
    }

    pub fn terms(&self, role: AgentRole) -> impl Iterator<Item = String> + '_ {
        self.lexicons.get(&role).into_iter().flatten().map(|t| t.join(" "))
    }
}

fn contains_seq(haystack: &[String], needle: &[String]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Scores every role by the lexicon terms present in `text`; a unique
/// highest positive score wins, anything else goes to the default role.
pub fn route_question(text: &str, table: &RoutingTable) -> Route {
    let toks = tokens(text);
    let mut scored: Vec<(AgentRole, u32, Vec<String>)> = Vec::new();
    for (role, terms) in &table.lexicons {
        let mut score = 0;
        let mut matched = Vec::new();
        for term in terms {
            if contains_seq(&toks, term) {
                score += if term.len() > 1 { PHRASE_WEIGHT } else { WORD_WEIGHT };
                matched.push(term.join(" "));
            }
        }
        scored.push((*role, score, matched));
    }
    let best = scored.iter().map(|s| s.1).max().unwrap_or(0);
    let winners: Vec<_> = scored.iter().filter(|s| s.1 == best).collect();
    match winners.as_slice() {
        [(role, score, matched)] if best > 0 => Route { role: *role, score: *score, matched: matched.clone() },
        _ => Route { role: table.default_role, score: 0, matched: Vec::new() },
    }
}

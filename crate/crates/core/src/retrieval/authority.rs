use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

pub const DEFAULT_AUTHORITY: f64 = 0.3;

const SHIPPED_TABLE: &str = include_str!("../../resources/authority.toml");

/// Second-level labels under which registrations happen one level deeper,
/// e.g. `example.co.uk` or `cac.gov.cn`.
const SECOND_LEVEL: &[&str] = &["ac", "co", "com", "edu", "gov", "net", "org"];

/// Editable map from registrable domain to authority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorityTable {
    #[serde(default = "default_authority")]
    pub default: f64,
    #[serde(default)]
    pub domains: BTreeMap<String, f64>,
    #[serde(default)]
    pub suffixes: BTreeMap<String, f64>,
}

fn default_authority() -> f64 {
    DEFAULT_AUTHORITY
}

impl Default for AuthorityTable {
    fn default() -> Self {
        Self::shipped()
    }
}

impl AuthorityTable {
    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED_TABLE).expect("shipped authority table parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, RetrievalError> {
        let table: AuthorityTable =
            toml::from_str(text).map_err(|e| RetrievalError::Config(e.to_string()))?;
        let all = std::iter::once(&table.default)
            .chain(table.domains.values())
            .chain(table.suffixes.values());
        for v in all {
            if !(0.0..=1.0).contains(v) {
                return Err(RetrievalError::Config(format!("authority {v} outside [0, 1]")));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RetrievalError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Authority for a registrable domain or full host.
    pub fn lookup(&self, domain: &str) -> f64 {
        let domain = domain.trim().trim_end_matches('.').to_ascii_lowercase();
        if let Some(v) = self.domains.get(&domain) {
            return *v;
        }
        self.suffixes
            .iter()
            .filter(|(suffix, _)| {
                domain == **suffix || domain.ends_with(&format!(".{suffix}"))
            })
            .max_by_key(|(suffix, _)| suffix.len())
            .map(|(_, v)| *v)
            .unwrap_or(self.default)
    }

    pub fn lookup_url(&self, url: &str) -> f64 {
        registrable_domain(url).map_or(self.default, |d| self.lookup(&d))
    }
}

/// Registrable domain of an absolute http(s) url, or `None` if the url is
/// malformed or has no host name.
pub fn registrable_domain(url: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return None;
    }
    let host = match parsed.host()? {
        url::Host::Domain(d) => d.to_ascii_lowercase(),
        url::Host::Ipv4(ip) => return Some(ip.to_string()),
        url::Host::Ipv6(ip) => return Some(ip.to_string()),
    };
    let labels: Vec<&str> = host.trim_end_matches('.').split('.').collect();
    if labels.len() < 2 || labels.iter().any(|l| l.is_empty()) {
        return None;
    }
    let n = labels.len();
    let take = if n >= 3 && labels[n - 1].len() == 2 && SECOND_LEVEL.contains(&labels[n - 2]) {
        3
    } else {
        2
    };
    Some(labels[n - take..].join("."))
}

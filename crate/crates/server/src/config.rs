//! Service configuration file (TOML).
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! store = "data/audit.jsonl"
//! routing = "routing.toml"        # optional, shipped table otherwise
//!
//! [engine]
//! capacity = 16
//! stagger = 200                   # ms between first-wave agent starts
//!
//! [provider]
//! mode = "replay"                 # live | replay | scripted
//! fixtures = "fixtures/llm"
//!
//! [search]
//! mode = "fixture"                # live | fixture | off
//! fixtures = "fixtures/search"
//!
//! [retrieval]
//! threshold = 0.35
//! weights = { similarity = 0.7, authority = 0.3 }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use roundtable_core::agents::AgentDeps;
use roundtable_core::llm::{
    AdmissionQueue, ChatProvider, HttpChatProvider, Latency, RatePolicy, ReplayProvider, ScriptedProvider,
};
use roundtable_core::orchestrator::EngineConfig;
use roundtable_core::retrieval::{
    AuthorityTable, FixtureSearchProvider, HttpSearchProvider, RetrievalConfig, SearchProvider,
};
use roundtable_core::router::RoutingTable;
use roundtable_core::rulebook::Rulebook;
use roundtable_core::Clock;

pub const ENV_CONFIG: &str = "ENGINE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("provider setup failed: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Live,
    Replay,
    Scripted,
}

impl ProviderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderMode::Live => "live",
            ProviderMode::Replay => "replay",
            ProviderMode::Scripted => "scripted",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    /// Recorded streams for `replay`, script directory for `scripted`.
    pub fixtures: PathBuf,
    pub model: String,
    pub first_chunk_ms: u64,
    pub per_chunk_ms: u64,
    pub rate: RatePolicy,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        let latency = Latency::default();
        Self {
            mode: ProviderMode::Replay,
            fixtures: PathBuf::from("fixtures/llm"),
            model: "gpt-4o-mini".into(),
            first_chunk_ms: latency.first_chunk.as_millis() as u64,
            per_chunk_ms: latency.per_chunk.as_millis() as u64,
            rate: RatePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Live,
    Fixture,
    Off,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub mode: SearchMode,
    pub fixtures: PathBuf,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { mode: SearchMode::Fixture, fixtures: PathBuf::from("fixtures/search"), endpoint: None, timeout_ms: 8000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub store: PathBuf,
    pub routing: Option<PathBuf>,
    pub authority: Option<PathBuf>,
    pub rulebook: Option<PathBuf>,
    pub max_proposal_bytes: usize,
    pub engine: EngineConfig,
    pub provider: ProviderConfig,
    pub search: SearchConfig,
    pub retrieval: RetrievalConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store: PathBuf::from("roundtable-audit.jsonl"),
            routing: None,
            authority: None,
            rulebook: None,
            max_proposal_bytes: roundtable_core::DEFAULT_MAX_PROPOSAL_BYTES,
            engine: EngineConfig::default(),
            provider: ProviderConfig::default(),
            search: SearchConfig::default(),
            retrieval: RetrievalConfig::default(),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

impl ServiceConfig {
    pub fn from_toml(text: &str, base: &Path, origin: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ServiceConfig =
            toml::from_str(text).map_err(|source| ConfigError::Toml { path: origin.to_path_buf(), source })?;
        cfg.rebase(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&read(path)?, base, path)
    }

    /// `--config` wins over `ENGINE_CONFIG`; without either the defaults apply.
    pub fn resolve(flag: Option<&Path>) -> Result<Self, ConfigError> {
        match flag.map(Path::to_path_buf).or_else(|| std::env::var_os(ENV_CONFIG).map(PathBuf::from)) {
            Some(path) => Self::load(&path),
            None => Ok(Self::default()),
        }
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store);
        fix(&mut self.provider.fixtures);
        fix(&mut self.search.fixtures);
        for p in [&mut self.routing, &mut self.authority, &mut self.rulebook].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.engine.capacity == 0 {
            return Err(ConfigError::Invalid("engine.capacity must be at least 1".into()));
        }
        if self.max_proposal_bytes == 0 {
            return Err(ConfigError::Invalid("max_proposal_bytes must be at least 1".into()));
        }
        self.retrieval.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn routing_table(&self) -> Result<RoutingTable, ConfigError> {
        match &self.routing {
            Some(p) => RoutingTable::load(p).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display()))),
            None => Ok(RoutingTable::shipped()),
        }
    }

    pub fn rulebook(&self) -> Result<Rulebook, ConfigError> {
        match &self.rulebook {
            Some(p) => toml::from_str(&read(p)?).map_err(|source| ConfigError::Toml { path: p.clone(), source }),
            None => Ok(Rulebook::seed()),
        }
    }

    fn chat_provider(&self, clock: Arc<dyn Clock>) -> Result<Arc<dyn ChatProvider>, ConfigError> {
        let p = &self.provider;
        Ok(match p.mode {
            ProviderMode::Live => Arc::new(
                HttpChatProvider::from_env(p.model.clone()).map_err(|e| ConfigError::Provider(e.to_string()))?,
            ),
            ProviderMode::Replay => {
                let latency = Latency {
                    first_chunk: Duration::from_millis(p.first_chunk_ms),
                    per_chunk: Duration::from_millis(p.per_chunk_ms),
                    jitter: None,
                };
                Arc::new(ReplayProvider::new(&p.fixtures, clock).with_latency(latency))
            }
            ProviderMode::Scripted => Arc::new(ScriptedProvider::from_dir(&p.fixtures)),
        })
    }

    fn search_provider(&self) -> Result<Option<Arc<dyn SearchProvider>>, ConfigError> {
        let s = &self.search;
        Ok(match s.mode {
            SearchMode::Off => None,
            SearchMode::Fixture => Some(Arc::new(FixtureSearchProvider::new(&s.fixtures))),
            SearchMode::Live => Some(Arc::new(
                HttpSearchProvider::from_env(s.endpoint.clone(), Duration::from_millis(s.timeout_ms))
                    .map_err(|e| ConfigError::Provider(e.to_string()))?,
            )),
        })
    }

    /// Builds agent dependencies; live mode also gets an admission queue.
    pub fn agent_deps(&self, clock: Arc<dyn Clock>) -> Result<AgentDeps, ConfigError> {
        let mut deps = AgentDeps::new(self.chat_provider(clock.clone())?, clock.clone());
        deps.search = self.search_provider()?;
        deps.rulebook = Arc::new(self.rulebook()?);
        if let Some(p) = &self.authority {
            deps.authority = Arc::new(AuthorityTable::load(p).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        }
        deps.retrieval = self.retrieval.clone();
        if self.provider.mode == ProviderMode::Live {
            deps.admission = Some(
                AdmissionQueue::new(self.provider.rate, clock).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            );
        }
        Ok(deps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let text = "store = \"audit.jsonl\"\n[provider]\nmode = \"scripted\"\nfixtures = \"/abs/scripts\"\n\
                    [engine]\ncapacity = 3\nstagger = 50\n[retrieval]\nthreshold = 0.5\n";
        let cfg = ServiceConfig::from_toml(text, Path::new("/etc/rt"), Path::new("/etc/rt/c.toml")).unwrap();
        assert_eq!(cfg.store, PathBuf::from("/etc/rt/audit.jsonl"));
        assert_eq!(cfg.provider.fixtures, PathBuf::from("/abs/scripts"));
        assert_eq!(cfg.provider.mode, ProviderMode::Scripted);
        assert_eq!(cfg.engine.capacity, 3);
        assert_eq!(cfg.engine.stagger, Duration::from_millis(50));
        assert_eq!(cfg.retrieval.threshold, 0.5);
        assert_eq!(cfg.search.mode, SearchMode::Fixture);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let base = Path::new(".");
        assert!(matches!(
            ServiceConfig::from_toml("[engine]\ncapacity = 0\n", base, base),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ServiceConfig::from_toml("[retrieval]\nthreshold = 2.0\n", base, base),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(ServiceConfig::from_toml("colour = 1\n", base, base), Err(ConfigError::Toml { .. })));
    }
}

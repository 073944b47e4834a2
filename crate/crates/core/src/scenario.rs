//! Scenario fixtures on disk: a proposal, scripted role outputs, canned search
//! results, recorded LLM streams and the outcome a review should reach.
//!
//! ```text
//! <scenario>/
//!   proposal.txt      title line, optional "Jurisdictions:" line, body
//!   questions.txt     one reviewer question per line
//!   expected.json     {"overall_risk", "exit_code", "recheck"}
//!   script/*.md       scripted model output selected by request tag
//!   search/*.json     canned search responses keyed by normalized query
//!   llm/*.jsonl       recorded streams keyed by request hash
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentDeps;
use crate::clock::Clock;
use crate::domain::{
    validate_proposal, ConflictKind, DomainError, Proposal, RiskLevel, SessionEvent, DEFAULT_MAX_PROPOSAL_BYTES,
};
use crate::llm::{ChatProvider, Latency, RecordingProvider, ReplayProvider, ScriptedProvider};
use crate::orchestrator::{Engine, EngineConfig, EngineError, NoAudit, SessionError, SessionState, SessionView};
use crate::retrieval::FixtureSearchProvider;
use crate::router::RoutingTable;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Proposal(#[from] DomainError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedRecheck {
    pub kind: ConflictKind,
    pub issue_key: String,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub overall_risk: RiskLevel,
    pub exit_code: i32,
    pub recheck: Option<ExpectedRecheck>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dir: PathBuf,
    pub proposal: Proposal,
    pub questions: Vec<String>,
    pub expected: Expected,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

impl Scenario {
    pub fn load(dir: impl Into<PathBuf>) -> Result<Self, ScenarioError> {
        let dir = dir.into();
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("scenario").to_string();
        let proposal = Proposal::from_text(name.clone(), &read(&dir.join("proposal.txt"))?);
        let questions_path = dir.join("questions.txt");
        let questions = if questions_path.exists() {
            read(&questions_path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
        } else {
            Vec::new()
        };
        let expected_path = dir.join("expected.json");
        let expected = serde_json::from_str(&read(&expected_path)?)
            .map_err(|source| ScenarioError::Json { path: expected_path, source })?;
        Ok(Self { name, dir, proposal, questions, expected })
    }

    /// Every scenario directory under `root`, sorted by name.
    pub fn discover(root: &Path) -> Result<Vec<Self>, ScenarioError> {
        let entries = std::fs::read_dir(root).map_err(|source| ScenarioError::Io { path: root.to_path_buf(), source })?;
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join("proposal.txt").is_file())
            .collect();
        dirs.sort();
        dirs.into_iter().map(Self::load).collect()
    }

    pub fn script_dir(&self) -> PathBuf {
        self.dir.join("script")
    }

    pub fn search_dir(&self) -> PathBuf {
        self.dir.join("search")
    }

    pub fn llm_dir(&self) -> PathBuf {
        self.dir.join("llm")
    }

    fn deps(&self, provider: Arc<dyn ChatProvider>, clock: Arc<dyn Clock>) -> AgentDeps {
        AgentDeps::new(provider, clock).with_search(Arc::new(FixtureSearchProvider::new(self.search_dir())))
    }

    /// Model output comes straight from the scripts.
    pub fn scripted_deps(&self, clock: Arc<dyn Clock>) -> AgentDeps {
        self.deps(Arc::new(ScriptedProvider::from_dir(self.script_dir())), clock)
    }

    /// Model output comes from the recorded streams.
    pub fn replay_deps(&self, clock: Arc<dyn Clock>, latency: Latency) -> AgentDeps {
        let provider = ReplayProvider::new(self.llm_dir(), clock.clone()).with_latency(latency);
        self.deps(Arc::new(provider), clock)
    }
}

/// Outcome of one scenario session, including answered questions.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub view: SessionView,
    pub events: Vec<SessionEvent>,
}

/// Runs the scenario proposal to a report, asks every scenario question,
/// waits for the answers and closes the session. The returned view is the
/// last one before closing.
pub async fn run(engine: &Engine, scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let proposal = validate_proposal(scenario.proposal.clone(), DEFAULT_MAX_PROPOSAL_BYTES)?;
    let handle = engine.start_session(proposal)?;
    let mut view = handle.settled().await;
    if view.state.accepts_questions() {
        for q in &scenario.questions {
            handle.ask(q).await?;
        }
        let n = scenario.questions.len();
        view = handle.wait_for(|v| v.answers.len() == n && v.answers.iter().all(|a| a.done)).await;
    }
    handle.close();
    handle.wait_for(|v| v.state == SessionState::Closed).await;
    Ok(ScenarioRun { view, events: handle.log().snapshot() })
}

/// Replays the scripts through a recording provider, writing one stream
/// fixture per request into `out`. Returns the written keys, sorted.
pub async fn record(scenario: &Scenario, clock: Arc<dyn Clock>, out: &Path) -> Result<Vec<String>, ScenarioError> {
    std::fs::create_dir_all(out).map_err(|source| ScenarioError::Io { path: out.to_path_buf(), source })?;
    let recorder = Arc::new(RecordingProvider::new(
        Arc::new(ScriptedProvider::from_dir(scenario.script_dir())),
        out,
    ));
    let deps = scenario.deps(recorder.clone(), clock);
    let config = EngineConfig { stagger: std::time::Duration::ZERO, ..EngineConfig::default() };
    let engine = Engine::new(deps, Arc::new(RoutingTable::shipped()), Arc::new(NoAudit), config);
    run(&engine, scenario).await?;
    let mut keys = recorder.recorded_keys();
    keys.sort();
    keys.dedup();
    Ok(keys)
}

//! Regenerates scenario fixtures: recorded model streams and the event log
//! of a replayed session.
//!
//! Event logs are only byte-stable when produced on a paused tokio runtime,
//! where the simulated clock drives every timestamp.

use std::path::Path;
use std::sync::Arc;

use roundtable_core::llm::Latency;
use roundtable_core::orchestrator::{Engine, EngineConfig, NoAudit};
use roundtable_core::router::RoutingTable;
use roundtable_core::scenario::{self, Scenario, ScenarioError};
use roundtable_core::SimulatedClock;

pub const EVENTS_FILE: &str = "events.jsonl";

/// Runs the scenario on its recorded streams and returns the event log as JSON lines.
pub async fn replay_events(s: &Scenario) -> Result<String, ScenarioError> {
    let deps = s.replay_deps(Arc::new(SimulatedClock::new()), Latency::default());
    let engine = Engine::new(deps, Arc::new(RoutingTable::shipped()), Arc::new(NoAudit), EngineConfig::default());
    let run = scenario::run(&engine, s).await?;
    Ok(run.events.iter().map(|e| serde_json::to_string(e).expect("events serialize") + "\n").collect())
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io { path: path.to_path_buf(), source }
}

/// Rewrites `llm/` and `events.jsonl` for one scenario. Returns the number
/// of recorded streams.
pub async fn record(s: &Scenario) -> Result<usize, ScenarioError> {
    let llm = s.llm_dir();
    if llm.exists() {
        std::fs::remove_dir_all(&llm).map_err(io(&llm))?;
    }
    let keys = scenario::record(s, Arc::new(SimulatedClock::new()), &llm).await?;
    let events = replay_events(s).await?;
    let path = s.dir.join(EVENTS_FILE);
    std::fs::write(&path, events).map_err(io(&path))?;
    Ok(keys.len())
}

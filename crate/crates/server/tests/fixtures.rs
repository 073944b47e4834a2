//! Recorded streams and event logs must match what the scripts produce today.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use roundtable_core::scenario::{self, Scenario};
use roundtable_core::SimulatedClock;
use roundtable_server::fixtures::{replay_events, EVENTS_FILE};

fn read_dir(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

#[tokio::test(start_paused = true)]
async fn recorded_fixtures_are_fresh() {
    let root = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/scenarios"));
    for s in Scenario::discover(&root).unwrap() {
        let tmp = tempfile::tempdir().unwrap();
        scenario::record(&s, Arc::new(SimulatedClock::new()), tmp.path()).await.unwrap();
        assert_eq!(read_dir(tmp.path()), read_dir(&s.llm_dir()), "{}: run `roundtable fixtures record`", s.name);
        let events = replay_events(&s).await.unwrap();
        let recorded = std::fs::read_to_string(s.dir.join(EVENTS_FILE)).unwrap();
        assert!(events == recorded, "{}: event log is stale", s.name);
    }
}

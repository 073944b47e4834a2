//! Roundtable compliance pre-review engine.
//!
//! Four role-specialized LLM agents review a product proposal side by side,
//! their reasoning is streamed as ordered session events, and the results are
//! merged into a graded, citation-grounded report.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: shared vocabulary (proposals, roles, risk levels, findings, events)
//! - [`llm`]: streaming chat providers, record/replay fixtures, admission scheduling
//! - [`retrieval`]: keyword expansion, search providers, authority-weighted ranking
//! - [`rulebook`]: versioned statute and checklist entries used for citations
//! - [`agents`]: prompt construction, streamed execution and report parsers
//! - [`synthesis`]: inconsistency detection, recheck planning, consolidation
//! - [`router`]: keyword routing of reviewer questions
//! - [`orchestrator`]: the per-session state machine and its async driver
//! - [`scenario`]: on-disk review scenarios used for replay, recording and tests

pub mod agents;
pub mod clock;
pub mod domain;
pub mod llm;
pub mod orchestrator;
pub mod retrieval;
pub mod router;
pub mod scenario;
pub mod rulebook;
pub mod synthesis;
pub mod text;

pub use clock::{Clock, SimulatedClock, WallClock};
pub use domain::*;

//! Per-session coordinator. Agent and answer tasks run concurrently and talk
//! to the coordinator only through its command queue; the coordinator alone
//! mutates session state and appends to the event log.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch, OwnedSemaphorePermit};

use super::audit::{AuditEntry, AuditKind, AuditSink};
use super::log::EventLog;
use crate::agents::{
    build_answer_prompt, run_agent_with_digest, stream_with_retry, AgentDeps, AgentEvent, AgentSpec, Focus,
    ParsedReport, PromptContext,
};
use crate::domain::{
    AgentReport, AgentRole, AgentStatus, ConsolidatedReport, EventPayload, Finding, Inconsistency, QuestionId,
    RiskLevel, SessionId, ValidatedProposal,
};
use crate::retrieval::SearchDigest;
use crate::router::{route_question, RoutingTable};
use crate::synthesis::{
    apply_recheck, consolidate, detect_inconsistencies, most_severe, resolve_after_recheck, ConsolidationInput,
    RecheckPlanner, RecheckTask,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    Analyzing,
    Rechecking,
    Consolidating,
    ReportReady,
    Failed,
    Closed,
}

impl SessionState {
    /// Analysis is over; questions may still be asked in `ReportReady`.
    pub fn is_settled(self) -> bool {
        matches!(self, SessionState::ReportReady | SessionState::Failed | SessionState::Closed)
    }

    pub fn accepts_questions(self) -> bool {
        !matches!(self, SessionState::Failed | SessionState::Closed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("session is closed")]
    SessionClosed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: QuestionId,
    pub question: String,
    pub role: AgentRole,
    pub matched: Vec<String>,
    pub text: String,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Point-in-time view of a session, published after every state change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub state: SessionState,
    pub round: u32,
    pub rulebook_version: String,
    pub agent_states: BTreeMap<AgentRole, AgentStatus>,
    pub reports: Vec<AgentReport>,
    pub report: Option<ConsolidatedReport>,
    pub answers: Vec<Answer>,
    /// Set when the audit store rejected a write; the session carries on in memory.
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub(crate) enum Command {
    Agent { role: AgentRole, round: u32, event: AgentEvent },
    Done { role: AgentRole, round: u32, report: Box<AgentReport>, digest: Option<SearchDigest> },
    Ask { text: String, reply: oneshot::Sender<Result<QuestionId, SessionError>> },
    AnswerDelta { id: QuestionId, text: String },
    AnswerDone { id: QuestionId, error: Option<String> },
    Close,
}

/// Cheap, cloneable access to one running or finished session.
#[derive(Clone)]
pub struct SessionHandle {
    id: SessionId,
    log: Arc<EventLog>,
    tx: mpsc::UnboundedSender<Command>,
    view: watch::Receiver<SessionView>,
}

impl std::fmt::Debug for SessionHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionHandle").field("id", &self.id).field("state", &self.state()).finish()
    }
}

impl SessionHandle {
    pub fn id(&self) -> &SessionId {
        &self.id
    }

    pub fn log(&self) -> &Arc<EventLog> {
        &self.log
    }

    pub fn view(&self) -> SessionView {
        self.view.borrow().clone()
    }

    pub fn state(&self) -> SessionState {
        self.view.borrow().state
    }

    /// Routes a question to one agent and starts an additive answer round.
    pub async fn ask(&self, text: &str) -> Result<QuestionId, SessionError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::EmptyQuestion);
        }
        let (reply, rx) = oneshot::channel();
        self.tx.send(Command::Ask { text: text.to_string(), reply }).map_err(|_| SessionError::SessionClosed)?;
        rx.await.map_err(|_| SessionError::SessionClosed)?
    }

    pub fn close(&self) {
        let _ = self.tx.send(Command::Close);
    }

    /// Waits until analysis has finished (report issued, failed or closed).
    pub async fn settled(&self) -> SessionView {
        self.wait_for(|v| v.state.is_settled()).await
    }

    /// Waits until `pred` holds for the published view.
    pub async fn wait_for(&self, pred: impl Fn(&SessionView) -> bool) -> SessionView {
        let mut rx = self.view.clone();
        let found = rx.wait_for(|v| pred(v)).await.map(|v| v.clone());
        found.unwrap_or_else(|_| rx.borrow().clone())
    }
}

pub(crate) struct Settings {
    pub stagger: Duration,
}

pub(crate) struct Coordinator {
    id: SessionId,
    proposal: Arc<ValidatedProposal>,
    deps: AgentDeps,
    routing: Arc<RoutingTable>,
    audit: Arc<dyn AuditSink>,
    log: Arc<EventLog>,
    view_tx: watch::Sender<SessionView>,
    tx: mpsc::WeakUnboundedSender<Command>,
    settings: Settings,
    origin: Duration,
    permit: Option<OwnedSemaphorePermit>,

    state: SessionState,
    round: u32,
    statuses: BTreeMap<AgentRole, AgentStatus>,
    pending: BTreeSet<AgentRole>,
    planner_started: bool,
    current: BTreeMap<AgentRole, AgentReport>,
    recheck_reports: BTreeMap<AgentRole, AgentReport>,
    all_reports: Vec<AgentReport>,
    digest: Option<SearchDigest>,
    flagged: Vec<Inconsistency>,
    rechecks: RecheckPlanner,
    recheck: Option<RecheckTask>,
    superseded: Vec<Finding>,
    report: Option<ConsolidatedReport>,
    answers: Vec<Answer>,
    degraded: bool,
    failure: Option<String>,
}

pub(crate) struct Spawned {
    pub handle: SessionHandle,
    pub coordinator: Coordinator,
    pub rx: mpsc::UnboundedReceiver<Command>,
}

impl Coordinator {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn create(
        id: SessionId,
        proposal: ValidatedProposal,
        deps: AgentDeps,
        routing: Arc<RoutingTable>,
        audit: Arc<dyn AuditSink>,
        settings: Settings,
        permit: OwnedSemaphorePermit,
    ) -> Spawned {
        let (tx, rx) = mpsc::unbounded_channel();
        let log = Arc::new(EventLog::new());
        let view = SessionView {
            session_id: id.clone(),
            state: SessionState::Created,
            round: 0,
            rulebook_version: deps.rulebook.version.clone(),
            agent_states: AgentRole::ALL.iter().map(|r| (*r, AgentStatus::Idle)).collect(),
            reports: Vec::new(),
            report: None,
            answers: Vec::new(),
            degraded: false,
            failure: None,
        };
        let (view_tx, view_rx) = watch::channel(view);
        let origin = deps.clock.elapsed();
        let coordinator = Coordinator {
            id: id.clone(),
            proposal: Arc::new(proposal),
            deps,
            routing,
            audit,
            log: log.clone(),
            view_tx,
            tx: tx.downgrade(),
            settings,
            origin,
            permit: Some(permit),
            state: SessionState::Created,
            round: 0,
            statuses: AgentRole::ALL.iter().map(|r| (*r, AgentStatus::Idle)).collect(),
            pending: BTreeSet::new(),
            planner_started: false,
            current: BTreeMap::new(),
            recheck_reports: BTreeMap::new(),
            all_reports: Vec::new(),
            digest: None,
            flagged: Vec::new(),
            rechecks: RecheckPlanner::default(),
            recheck: None,
            superseded: Vec::new(),
            report: None,
            answers: Vec::new(),
            degraded: false,
            failure: None,
        };
        Spawned { handle: SessionHandle { id, log, tx, view: view_rx }, coordinator, rx }
    }

    pub(crate) async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>) {
        self.start();
        while let Some(cmd) = rx.recv().await {
            if self.state == SessionState::Closed {
                break;
            }
            match cmd {
                Command::Agent { role, round, event } => self.on_agent_event(role, round, event),
                Command::Done { role, round, report, digest } => self.on_done(role, round, *report, digest),
                Command::Ask { text, reply } => {
                    let _ = reply.send(self.on_question(text));
                }
                Command::AnswerDelta { id, text } => self.on_answer_delta(id, text),
                Command::AnswerDone { id, error } => self.on_answer_done(id, error),
                Command::Close => {
                    self.state = SessionState::Closed;
                    self.permit = None;
                    self.log.close();
                    self.publish();
                    break;
                }
            }
        }
    }

    fn emit(&self, payload: EventPayload) {
        let elapsed = self.deps.clock.elapsed().saturating_sub(self.origin);
        self.log.append(self.deps.clock.wall_now(), elapsed.as_millis() as u64, payload);
    }

    /// Publishes the view before appending `payload`, so a client reacting to
    /// the event always finds the state it announces.
    fn announce(&self, payload: EventPayload) {
        self.publish();
        self.emit(payload);
    }

    fn audit(&mut self, kind: AuditKind, payload: serde_json::Value) {
        let entry = AuditEntry {
            session_id: Some(self.id.clone()),
            kind,
            at: self.deps.clock.wall_now(),
            rulebook_version: self.deps.rulebook.version.clone(),
            payload,
        };
        if let Err(e) = self.audit.append(entry) {
            if !self.degraded {
                tracing::warn!(session = %self.id, error = %e, "audit store unavailable; continuing in memory");
            }
            self.degraded = true;
        }
    }

    fn publish(&self) {
        self.view_tx.send_replace(SessionView {
            session_id: self.id.clone(),
            state: self.state,
            round: self.round,
            rulebook_version: self.deps.rulebook.version.clone(),
            agent_states: self.statuses.clone(),
            reports: self.all_reports.clone(),
            report: self.report.clone(),
            answers: self.answers.clone(),
            degraded: self.degraded,
            failure: self.failure.clone(),
        });
    }

    fn start(&mut self) {
        self.emit(EventPayload::SessionStarted {
            session_id: self.id.clone(),
            proposal_id: self.proposal.proposal().id.clone(),
            rulebook_version: self.deps.rulebook.version.clone(),
        });
        let payload = serde_json::to_value(self.proposal.proposal()).expect("proposal serializes");
        self.audit(AuditKind::ProposalSubmitted, payload);
        self.state = SessionState::Analyzing;
        for (i, role) in AgentRole::FIRST_WAVE.into_iter().enumerate() {
            let delay = self.settings.stagger * i as u32;
            self.spawn_agent(role, delay, Vec::new(), None);
        }
        self.publish();
    }

    fn spawn_agent(&mut self, role: AgentRole, delay: Duration, prior: Vec<AgentReport>, focus: Option<Focus>) {
        let Some(tx) = self.tx.upgrade() else { return };
        self.pending.insert(role);
        let round = self.round;
        let deps = self.deps.clone();
        let proposal = self.proposal.clone();
        let digest = if role == AgentRole::PrecedentResearcher { self.digest.clone() } else { None };
        tokio::spawn(async move {
            if !delay.is_zero() {
                deps.clock.sleep(delay).await;
            }
            let spec = AgentSpec::for_role(role);
            let ctx = PromptContext {
                proposal: Some(&proposal),
                prior_reports: Some(&prior),
                search_digest: digest.as_ref(),
                focus: focus.as_ref(),
                round,
                recheck: focus.is_some(),
            };
            let events = tx.clone();
            let emit = move |event: AgentEvent| {
                let _ = events.send(Command::Agent { role, round, event });
            };
            let (report, built) = run_agent_with_digest(&spec, &ctx, &deps, &emit).await;
            let _ = tx.send(Command::Done { role, round, report: Box::new(report), digest: built.or(digest) });
        });
    }

    fn on_agent_event(&mut self, role: AgentRole, round: u32, event: AgentEvent) {
        if round != self.round || !self.pending.contains(&role) {
            tracing::warn!(session = %self.id, %role, round, "event from an agent that is not running");
            return;
        }
        match event {
            AgentEvent::Status { status, reason } => {
                let from = self.statuses[&role];
                if !from.can_transition_to(status) {
                    tracing::warn!(session = %self.id, %role, ?from, ?status, "illegal agent transition ignored");
                    return;
                }
                self.statuses.insert(role, status);
                self.announce(EventPayload::AgentStatusChanged { role, round, status, reason });
            }
            AgentEvent::Delta(text) => self.emit(EventPayload::AgentDelta { role, round, text }),
        }
    }

    fn on_done(&mut self, role: AgentRole, round: u32, report: AgentReport, digest: Option<SearchDigest>) {
        if round != self.round || !self.pending.remove(&role) {
            tracing::warn!(session = %self.id, %role, round, "stale agent report dropped");
            return;
        }
        if !self.statuses[&role].is_terminal() {
            let status = if report.is_usable() { AgentStatus::Completed } else { AgentStatus::Failed };
            self.statuses.insert(role, status);
        }
        if digest.is_some() {
            self.digest = digest;
        }
        let status = report.status;
        self.audit(AuditKind::AgentReportStored, serde_json::to_value(&report).expect("report serializes"));
        self.all_reports.push(report.clone());
        match self.state {
            SessionState::Analyzing => {
                self.current.insert(role, report);
            }
            SessionState::Rechecking => {
                self.recheck_reports.insert(role, report);
            }
            _ => {}
        }
        self.announce(EventPayload::AgentReportReady { role, round, status });
        self.advance();
        self.publish();
    }

    fn advance(&mut self) {
        if !self.pending.is_empty() {
            return;
        }
        match self.state {
            SessionState::Analyzing if !self.planner_started => {
                if !self.current.values().any(AgentReport::is_usable) {
                    self.fail("no usable agent reports".to_string());
                    return;
                }
                self.planner_started = true;
                let prior: Vec<AgentReport> = self.current.values().cloned().collect();
                self.spawn_agent(AgentRole::RiskPlanner, Duration::ZERO, prior, None);
            }
            SessionState::Analyzing => self.after_analysis(),
            SessionState::Rechecking => self.after_recheck(),
            _ => {}
        }
    }

    fn after_analysis(&mut self) {
        let reports: Vec<AgentReport> = self.current.values().cloned().collect();
        // A red line vetoes the review outright; no recheck can lower it.
        if has_red_line(&reports) {
            self.finish();
            return;
        }
        let incs = detect_inconsistencies(&reports);
        for inc in &incs {
            self.emit(EventPayload::InconsistencyFlagged { inconsistency: inc.clone() });
        }
        let task = most_severe(&incs, &reports).and_then(|target| self.rechecks.plan(target).ok());
        self.flagged = incs;
        let Some(task) = task else {
            self.finish();
            return;
        };
        self.state = SessionState::Rechecking;
        self.round += 1;
        for role in &task.roles {
            self.statuses.insert(*role, AgentStatus::Idle);
        }
        self.announce(EventPayload::RecheckStarted { issue_key: task.focus.issue_key.clone(), roles: task.roles.clone() });
        for role in &task.roles {
            let others: Vec<AgentReport> = self.current.values().filter(|r| r.role != *role).cloned().collect();
            self.spawn_agent(*role, Duration::ZERO, others, Some(task.focus.clone()));
        }
        self.recheck = Some(task);
    }

    fn after_recheck(&mut self) {
        let Some(task) = self.recheck.take() else { return self.finish() };
        for role in &task.roles {
            let (Some(orig), Some(new)) = (self.current.get(role), self.recheck_reports.get(role)) else { continue };
            let (updated, old) = apply_recheck(orig, new, &task.focus.issue_key);
            self.superseded.extend(old);
            self.current.insert(*role, updated);
        }
        let reports: Vec<AgentReport> = self.current.values().cloned().collect();
        let known = self.flagged.len();
        self.flagged = resolve_after_recheck(&self.flagged, &reports);
        for inc in &self.flagged[known..] {
            self.emit(EventPayload::InconsistencyFlagged { inconsistency: inc.clone() });
        }
        self.finish();
    }

    fn finish(&mut self) {
        self.state = SessionState::Consolidating;
        let reports: Vec<AgentReport> = self.current.values().cloned().collect();
        let input = ConsolidationInput {
            session_id: self.id.clone(),
            round: self.round,
            reports: &reports,
            inconsistencies: &self.flagged,
            superseded: &self.superseded,
            rulebook_version: &self.deps.rulebook.version,
            generated_at: self.deps.clock.wall_now(),
        };
        match consolidate(input) {
            Ok(report) => {
                let announced = EventPayload::ReportReady { round: self.round, overall_risk: report.overall_risk };
                self.audit(AuditKind::ReportIssued, serde_json::to_value(&report).expect("report serializes"));
                self.report = Some(report);
                self.state = SessionState::ReportReady;
                self.permit = None;
                self.announce(announced);
            }
            Err(e) => self.fail(e.to_string()),
        }
    }

    fn fail(&mut self, reason: String) {
        self.failure = Some(reason.clone());
        self.state = SessionState::Failed;
        self.permit = None;
        self.announce(EventPayload::SessionFailed { reason });
        self.log.close();
    }

    fn on_question(&mut self, text: String) -> Result<QuestionId, SessionError> {
        if !self.state.accepts_questions() {
            return Err(SessionError::SessionClosed);
        }
        let Some(tx) = self.tx.upgrade() else { return Err(SessionError::SessionClosed) };
        let id = QuestionId(format!("q{}", self.answers.len() + 1));
        let route = route_question(&text, &self.routing);
        self.audit(
            AuditKind::QuestionAsked,
            serde_json::json!({ "question_id": id, "text": text, "role": route.role, "matched": route.matched }),
        );
        self.answers.push(Answer {
            question_id: id.clone(),
            question: text.clone(),
            role: route.role,
            matched: route.matched.clone(),
            text: String::new(),
            done: false,
            error: None,
        });
        self.announce(EventPayload::QuestionRouted { question_id: id.clone(), role: route.role, matched: route.matched });

        let reports: Vec<AgentReport> = self.current.values().filter(|r| r.is_usable()).cloned().collect();
        let req = build_answer_prompt(route.role, &id, &text, &self.proposal, &reports);
        let deps = self.deps.clone();
        let qid = id.clone();
        tokio::spawn(async move {
            let deltas = tx.clone();
            let delta_id = qid.clone();
            let on_delta = move |t: &str| {
                let _ = deltas.send(Command::AnswerDelta { id: delta_id.clone(), text: t.to_string() });
            };
            let error = stream_with_retry(&req, &deps, &on_delta).await.err().map(|(e, _)| e.reason_code().to_string());
            let _ = tx.send(Command::AnswerDone { id: qid, error });
        });
        Ok(id)
    }

    fn on_answer_delta(&mut self, id: QuestionId, text: String) {
        if let Some(a) = self.answers.iter_mut().find(|a| a.question_id == id) {
            a.text.push_str(&text);
        }
        self.emit(EventPayload::AnswerDelta { question_id: id, text });
    }

    fn on_answer_done(&mut self, id: QuestionId, error: Option<String>) {
        let Some(a) = self.answers.iter_mut().find(|a| a.question_id == id) else { return };
        a.done = true;
        a.error = error.clone();
        let payload = serde_json::to_value(&*a).expect("answer serializes");
        self.audit(AuditKind::AnswerStored, payload);
        self.announce(EventPayload::AnswerReady { question_id: id, error });
    }
}

fn has_red_line(reports: &[AgentReport]) -> bool {
    reports.iter().filter(|r| r.is_usable()).any(|r| {
        r.findings.iter().any(|f| f.risk == RiskLevel::RedLine)
            || matches!(&r.parsed, Some(ParsedReport::Checklist(c)) if c.overall == RiskLevel::RedLine)
    })
}

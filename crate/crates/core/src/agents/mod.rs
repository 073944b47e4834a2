//! The four role-specialized agents.
//!
//! Each agent is a prompt template ([`AgentSpec`]), a rendering of the
//! session context into a user message ([`build_prompt`]), a streamed model
//! call ([`run_agent`]) and a tolerant parser for the role's report template.

mod brief;
mod checklist;
mod legal;
mod plan;
pub mod sections;

pub use brief::{brief_findings, parse_case_brief, render_case_brief, web_citation, CaseBrief, PrecedentCase, Trend, TrendKind};
pub use checklist::{
    checklist_findings, parse_checklist_report, render_checklist_report, CheckStatus, ChecklistReport, Tier1Row, Tier2Row,
};
pub use legal::{clause_topic, legal_findings, parse_legal_report, render_legal_report, ClauseRisk, LawFamily, LegalReport};
pub use plan::{bind_finding, parse_risk_plan, render_risk_plan, BoundPlan, RiskPlan, BIND_CONTAINMENT, GENERAL_ISSUE_KEY};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::domain::{AgentReport, AgentRole, AgentStatus, Finding, QuestionId, ReportStatus, ValidatedProposal};
use crate::llm::{complete_stream, AdmissionQueue, ChatMessage, ChatProvider, ChatRequest, LlmError};
use crate::retrieval::{build_digest, risk_flags, AuthorityTable, RetrievalConfig, SearchDigest, SearchProvider};
use crate::rulebook::Rulebook;

pub const LEGAL_PROMPT: &str = include_str!("../../resources/prompts/legal_interpreter.md");
pub const CHECKLIST_PROMPT: &str = include_str!("../../resources/prompts/rule_checker.md");
pub const RESEARCHER_PROMPT: &str = include_str!("../../resources/prompts/precedent_researcher.md");
pub const PLANNER_PROMPT: &str = include_str!("../../resources/prompts/risk_planner.md");
pub const ANSWER_PROMPT: &str = include_str!("../../resources/prompts/answer.md");

/// Minimum wait before the single retry of a transient provider error.
pub const RETRY_BACKOFF: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no template sections found")]
    NoSectionsFound,
}

/// A parsed value plus template deviations that make it degraded.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation<T> {
    pub value: T,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParsedReport {
    Legal(LegalReport),
    Checklist(ChecklistReport),
    CaseBrief(CaseBrief),
    RiskPlan(RiskPlan),
}

impl ParsedReport {
    pub fn summary(&self) -> &str {
        match self {
            ParsedReport::Legal(r) => &r.core_summary,
            ParsedReport::Checklist(r) => &r.core_summary,
            ParsedReport::CaseBrief(r) => &r.core_insight,
            ParsedReport::RiskPlan(_) => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Proposal,
    PriorReports,
    SearchDigest,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("{role:?} is missing inputs {missing:?}")]
    MissingInput { role: AgentRole, missing: BTreeSet<InputKind> },
    #[error("a focus issue is only allowed in recheck rounds")]
    FocusOutsideRecheck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSpec {
    pub role: AgentRole,
    pub system_prompt: &'static str,
    pub output_schema: &'static [&'static str],
    pub requires_inputs: &'static [InputKind],
}

impl AgentSpec {
    pub fn for_role(role: AgentRole) -> Self {
        match role {
            AgentRole::LegalInterpreter => AgentSpec {
                role,
                system_prompt: LEGAL_PROMPT,
                output_schema: &[
                    "1. Overall Risk Level Assessment",
                    "2. Core Legal Risk Analysis",
                    "3. Preliminary Compliance Path Recommendation",
                    "4. Points to Note",
                    "5. Disclaimer",
                ],
                requires_inputs: &[InputKind::Proposal],
            },
            AgentRole::RuleChecker => AgentSpec {
                role,
                system_prompt: CHECKLIST_PROMPT,
                output_schema: &[
                    "1. Overall Risk Assessment and Core Summary",
                    "2. Three-Tier Review Checklist Details",
                    "3. Disclaimer",
                ],
                requires_inputs: &[InputKind::Proposal],
            },
            AgentRole::PrecedentResearcher => AgentSpec {
                role,
                system_prompt: RESEARCHER_PROMPT,
                output_schema: &[
                    "1. Core Insights & Strategic Warning",
                    "2. Success Blueprints: Positive Precedents",
                    "3. Failure Playbooks: Cautionary Tales",
                    "4. Emerging Risks & Opportunities",
                ],
                requires_inputs: &[InputKind::Proposal, InputKind::SearchDigest],
            },
            AgentRole::RiskPlanner => AgentSpec {
                role,
                system_prompt: PLANNER_PROMPT,
                output_schema: &["1. Overall Risk Level", "2. Mitigation Actions", "3. Launch Conditions"],
                requires_inputs: &[InputKind::Proposal, InputKind::PriorReports],
            },
        }
    }
}

/// The contested point a recheck round must address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Focus {
    pub issue_key: String,
    /// What the other agents concluded, shown to the rechecked agent.
    pub note: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PromptContext<'a> {
    pub proposal: Option<&'a ValidatedProposal>,
    pub prior_reports: Option<&'a [AgentReport]>,
    pub search_digest: Option<&'a SearchDigest>,
    pub focus: Option<&'a Focus>,
    pub round: u32,
    pub recheck: bool,
}

pub fn request_tag(role: AgentRole, round: u32) -> String {
    format!("{}:r{round}", role.slug())
}

pub fn answer_tag(role: AgentRole, question: &QuestionId) -> String {
    format!("answer:{}:{question}", role.slug())
}

fn render_proposal(out: &mut String, p: &ValidatedProposal) {
    let p = p.proposal();
    let _ = writeln!(out, "### Proposal\nTitle: {}", p.title);
    if !p.jurisdiction_tags.is_empty() {
        let _ = writeln!(out, "Jurisdictions: {}", p.jurisdiction_tags.join(", "));
    }
    let _ = writeln!(out, "\n{}", p.body);
    for a in &p.attachments {
        let _ = writeln!(out, "\n#### Attachment: {}\n{}", a.name, a.text);
    }
}

fn render_finding(out: &mut String, f: &Finding) {
    let cites: Vec<&str> = f.basis.iter().map(|c| c.locator.as_str()).collect();
    let _ = write!(out, "- [{}] {} (issue key: {})", f.risk.label(), f.description, f.issue_key);
    if !cites.is_empty() {
        let _ = write!(out, "; cites: {}", cites.join("; "));
    }
    out.push('\n');
}

fn render_prior(out: &mut String, reports: &[AgentReport]) {
    out.push_str("\n### Colleague Reports\n");
    for r in reports {
        let status = match r.status {
            ReportStatus::Ok => "ok",
            ReportStatus::ParseDegraded => "partially parsed",
            ReportStatus::Failed => "failed",
        };
        let _ = writeln!(out, "\n#### {} (round {}, {status})", r.role.display_name(), r.round);
        if let Some(summary) = r.parsed.as_ref().map(ParsedReport::summary).filter(|s| !s.is_empty()) {
            let _ = writeln!(out, "Summary: {summary}");
        }
        if r.findings.is_empty() {
            out.push_str("Findings: none\n");
        } else {
            out.push_str("Findings:\n");
            for f in &r.findings {
                render_finding(out, f);
            }
        }
    }
}

/// Renders the chat request for one agent round.
pub fn build_prompt(spec: &AgentSpec, ctx: &PromptContext<'_>) -> Result<ChatRequest, AgentError> {
    let missing: BTreeSet<InputKind> = spec
        .requires_inputs
        .iter()
        .copied()
        .filter(|k| match k {
            InputKind::Proposal => ctx.proposal.is_none(),
            InputKind::PriorReports => ctx.prior_reports.is_none_or(|r| r.is_empty()),
            InputKind::SearchDigest => ctx.search_digest.is_none(),
        })
        .collect();
    if !missing.is_empty() {
        return Err(AgentError::MissingInput { role: spec.role, missing });
    }
    if ctx.focus.is_some() && !ctx.recheck {
        return Err(AgentError::FocusOutsideRecheck);
    }
    let mut user = String::new();
    if let Some(p) = ctx.proposal {
        render_proposal(&mut user, p);
    }
    if let Some(d) = ctx.search_digest {
        let _ = write!(user, "\n### Search Digest\n{}", d.render());
    }
    if let Some(reports) = ctx.prior_reports.filter(|_| spec.requires_inputs.contains(&InputKind::PriorReports)) {
        render_prior(&mut user, reports);
    }
    if let Some(focus) = ctx.focus {
        let topic = focus.issue_key.replace('+', " ");
        let _ = write!(
            user,
            "\n### Recheck Focus\nThis is a focused recheck round. Address only the issue \"{topic}\" \
             (issue key: {}). {}\nRe-examine this single point, state the exact clause you rely on and \
             the risk level you assign, and keep the usual output template. Include the line \
             \"Issue: {topic}\" in the item that covers it.\n",
            focus.issue_key, focus.note
        );
    }
    Ok(ChatRequest::new(
        request_tag(spec.role, ctx.round),
        vec![ChatMessage::system(spec.system_prompt), ChatMessage::user(user)],
    ))
}

/// Progress reported by a running agent.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentEvent {
    Status { status: AgentStatus, reason: Option<String> },
    Delta(String),
}

/// Everything an agent run needs besides its prompt context.
#[derive(Clone)]
pub struct AgentDeps {
    pub provider: Arc<dyn ChatProvider>,
    pub clock: Arc<dyn Clock>,
    pub admission: Option<Arc<AdmissionQueue>>,
    pub rulebook: Arc<Rulebook>,
    pub authority: Arc<AuthorityTable>,
    pub search: Option<Arc<dyn SearchProvider>>,
    pub retrieval: RetrievalConfig,
}

impl AgentDeps {
    /// Seed rulebook, shipped authority table, no search and no admission queue.
    pub fn new(provider: Arc<dyn ChatProvider>, clock: Arc<dyn Clock>) -> Self {
        Self {
            provider,
            clock,
            admission: None,
            rulebook: Arc::new(Rulebook::seed()),
            authority: Arc::new(AuthorityTable::shipped()),
            search: None,
            retrieval: RetrievalConfig::default(),
        }
    }

    pub fn with_search(mut self, search: Arc<dyn SearchProvider>) -> Self {
        self.search = Some(search);
        self
    }
}

pub type Emit<'a> = &'a (dyn Fn(AgentEvent) + Send + Sync);

/// Streams one request, retrying once on a transient error that happens
/// before any text arrived. Returns the text received so far on failure.
pub async fn stream_with_retry(
    req: &ChatRequest,
    deps: &AgentDeps,
    on_delta: &(dyn Fn(&str) + Send + Sync),
) -> Result<String, (LlmError, String)> {
    let mut retried = false;
    loop {
        let _permit = match &deps.admission {
            Some(q) => Some(q.acquire().await.map_err(|e| (LlmError::ProviderUnavailable(e.to_string()), String::new()))?),
            None => None,
        };
        let mut text = String::new();
        let result = async {
            let mut stream = complete_stream(deps.provider.as_ref(), req).await?;
            while let Some(chunk) = stream.next().await {
                let chunk = chunk?;
                if !chunk.text.is_empty() {
                    text.push_str(&chunk.text);
                    on_delta(&chunk.text);
                }
            }
            Ok::<(), LlmError>(())
        }
        .await;
        match result {
            Ok(()) => return Ok(text),
            Err(e) if !retried && text.is_empty() && e.is_transient() => {
                retried = true;
                let wait = match &e {
                    LlmError::RateLimited { retry_after: Some(d) } => (*d).max(RETRY_BACKOFF),
                    _ => RETRY_BACKOFF,
                };
                drop(_permit);
                deps.clock.sleep(wait).await;
            }
            Err(e) => return Err((e, text)),
        }
    }
}

/// Parses raw model output for `role` into a report.
pub fn interpret(
    role: AgentRole,
    round: u32,
    raw: String,
    prior: &[Finding],
    rulebook: &Rulebook,
    table: &AuthorityTable,
) -> AgentReport {
    let mut extra_citations = Vec::new();
    let outcome: Result<(ParsedReport, Vec<Finding>, Vec<String>), ParseError> = match role {
        AgentRole::LegalInterpreter => parse_legal_report(&raw).map(|i| {
            let f = legal_findings(&i.value, round, rulebook);
            (ParsedReport::Legal(i.value), f, i.problems)
        }),
        AgentRole::RuleChecker => parse_checklist_report(&raw).map(|i| {
            let f = checklist_findings(&i.value, round, rulebook);
            (ParsedReport::Checklist(i.value), f, i.problems)
        }),
        AgentRole::PrecedentResearcher => parse_case_brief(&raw, table).map(|i| {
            let f = brief_findings(&i.value, round);
            extra_citations = i.value.success_cases.iter().flat_map(|c| c.links.clone()).collect();
            (ParsedReport::CaseBrief(i.value), f, i.problems)
        }),
        AgentRole::RiskPlanner => parse_risk_plan(&raw, prior, round).map(|i| {
            let f = i.value.general.into_iter().collect();
            (ParsedReport::RiskPlan(i.value.plan), f, i.problems)
        }),
    };
    let mut report = match outcome {
        Ok((parsed, findings, problems)) => AgentReport {
            role,
            round,
            raw_text: raw,
            findings,
            citations: extra_citations,
            parsed: Some(parsed),
            status: if problems.is_empty() { ReportStatus::Ok } else { ReportStatus::ParseDegraded },
            notes: problems,
            failure: None,
        },
        Err(e) => AgentReport {
            role,
            round,
            raw_text: raw,
            findings: Vec::new(),
            citations: Vec::new(),
            parsed: None,
            status: ReportStatus::ParseDegraded,
            notes: vec![e.to_string()],
            failure: None,
        },
    };
    report.index_finding_citations();
    report
}

/// Runs one agent round end to end, emitting status changes and deltas.
///
/// The precedent researcher builds its search digest after turning
/// `Thinking` when the context does not already carry one.
pub async fn run_agent(spec: &AgentSpec, ctx: &PromptContext<'_>, deps: &AgentDeps, emit: Emit<'_>) -> AgentReport {
    run_agent_with_digest(spec, ctx, deps, emit).await.0
}

/// Like [`run_agent`], also returning the search digest the researcher
/// built so a later round can reuse it.
pub async fn run_agent_with_digest(
    spec: &AgentSpec,
    ctx: &PromptContext<'_>,
    deps: &AgentDeps,
    emit: Emit<'_>,
) -> (AgentReport, Option<SearchDigest>) {
    let role = spec.role;
    let round = ctx.round;
    let fail = |reason: String, raw: String| {
        emit(AgentEvent::Status { status: AgentStatus::Failed, reason: Some(reason.clone()) });
        AgentReport::failed(role, round, raw, reason)
    };
    emit(AgentEvent::Status { status: AgentStatus::Thinking, reason: None });

    let mut digest_holder = None;
    let mut ctx = *ctx;
    if role == AgentRole::PrecedentResearcher && ctx.search_digest.is_none() {
        if let (Some(p), Some(search)) = (ctx.proposal, deps.search.as_ref()) {
            let scenario = format!("{}\n{}", p.proposal().title, p.proposal().body);
            let flags = risk_flags(&scenario);
            match build_digest(&scenario, &flags, round, deps.provider.as_ref(), search.as_ref(), &deps.authority, &deps.retrieval)
                .await
            {
                Ok(d) => digest_holder = Some(d),
                Err(e) => return (fail(format!("retrieval failed: {e}"), String::new()), None),
            }
        }
    }
    if digest_holder.is_some() {
        ctx.search_digest = digest_holder.as_ref();
    }
    let req = match build_prompt(spec, &ctx) {
        Ok(r) => r,
        Err(e) => return (fail(e.to_string(), String::new()), digest_holder),
    };

    let speaking = std::sync::atomic::AtomicBool::new(false);
    let on_delta = |text: &str| {
        if !speaking.swap(true, std::sync::atomic::Ordering::SeqCst) {
            emit(AgentEvent::Status { status: AgentStatus::Speaking, reason: None });
        }
        emit(AgentEvent::Delta(text.to_string()));
    };
    match stream_with_retry(&req, deps, &on_delta).await {
        Ok(raw) => {
            if !speaking.load(std::sync::atomic::Ordering::SeqCst) {
                emit(AgentEvent::Status { status: AgentStatus::Speaking, reason: None });
            }
            let prior: Vec<Finding> =
                ctx.prior_reports.unwrap_or_default().iter().flat_map(|r| r.findings.iter().cloned()).collect();
            let report = interpret(role, round, raw, &prior, &deps.rulebook, &deps.authority);
            emit(AgentEvent::Status { status: AgentStatus::Completed, reason: None });
            (report, digest_holder)
        }
        Err((e, raw)) => (fail(e.reason_code().to_string(), raw), digest_holder),
    }
}

/// Builds the request for a follow-up question answered by `role`.
pub fn build_answer_prompt(
    role: AgentRole,
    question_id: &QuestionId,
    question: &str,
    proposal: &ValidatedProposal,
    reports: &[AgentReport],
) -> ChatRequest {
    let system = format!("{}\n\n{}", AgentSpec::for_role(role).system_prompt, ANSWER_PROMPT);
    let mut user = String::new();
    render_proposal(&mut user, proposal);
    if !reports.is_empty() {
        render_prior(&mut user, reports);
    }
    let _ = write!(user, "\n### Question\n{}\n", question.trim());
    ChatRequest::new(answer_tag(role, question_id), vec![ChatMessage::system(system), ChatMessage::user(user)])
}

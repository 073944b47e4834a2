use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use roundtable_core::orchestrator::EventLog;
use roundtable_core::scenario::Scenario;
use roundtable_core::{validate_proposal, Proposal, WallClock};
use roundtable_server::config::ServiceConfig;
use roundtable_server::review::{self, FrontMatter, EXIT_FAILURE, EXIT_USAGE};
use roundtable_server::{api, build_state, fixtures};

#[derive(Parser)]
#[command(name = "roundtable", version, about = "Multi-agent compliance pre-review")]
struct Cli {
    /// Config file; falls back to ENGINE_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
    },
    /// Review one proposal file headlessly; the exit code encodes the risk.
    Review {
        proposal: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the session event log (JSON lines).
        #[arg(long)]
        events: Option<PathBuf>,
        /// Ask a follow-up question once the report is ready (repeatable).
        #[arg(long = "question")]
        questions: Vec<String>,
    },
    /// Print a recorded event log in seq order.
    Replay {
        log: PathBuf,
        /// Print SSE frames instead of JSON lines.
        #[arg(long)]
        sse: bool,
    },
    /// Regenerate scenario fixtures.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Subcommand)]
enum FixturesCommand {
    /// Re-record model streams and event logs from the scenario scripts.
    Record {
        #[arg(long, default_value = "fixtures/scenarios")]
        scenarios: PathBuf,
        /// Only this scenario.
        #[arg(long)]
        only: Option<String>,
    },
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("roundtable: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Replay { log, sse } => replay(&log, sse),
        Command::Fixtures { command: FixturesCommand::Record { scenarios, only } } => record(&scenarios, only),
        command => {
            let cfg = match ServiceConfig::resolve(cli.config.as_deref()) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_FAILURE, e),
            };
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            rt.block_on(async move {
                match command {
                    Command::Serve { bind } => serve(cfg, bind).await,
                    Command::Review { proposal, out, events, questions } => {
                        run_review(cfg, &proposal, out.as_deref(), events.as_deref(), &questions).await
                    }
                    _ => unreachable!("handled above"),
                }
            })
        }
    }
}

async fn serve(cfg: ServiceConfig, bind: Option<std::net::SocketAddr>) -> ExitCode {
    let state = match build_state(&cfg, Arc::new(WallClock::new())) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    let addr = bind.unwrap_or(cfg.bind);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => return fail(EXIT_FAILURE, format!("cannot bind {addr}: {e}")),
    };
    tracing::info!(%addr, mode = state.provider_mode, "serving");
    let app = api::router(state);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_FAILURE, e),
    }
}

async fn run_review(
    cfg: ServiceConfig,
    path: &Path,
    out: Option<&Path>,
    events: Option<&Path>,
    questions: &[String],
) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
    };
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("proposal").to_string();
    let proposal = Proposal::from_text(id, &text);
    let title = proposal.title.clone();
    let proposal_id = proposal.id.clone();
    let validated = match validate_proposal(proposal, cfg.max_proposal_bytes) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
    };
    let state = match build_state(&cfg, Arc::new(WallClock::new())) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    let handle = match state.engine.start_session(validated) {
        Ok(h) => h,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    let view = handle.settled().await;
    let Some(report) = view.report.clone() else {
        let why = view.failure.unwrap_or_else(|| format!("session ended in state {:?}", view.state));
        return fail(EXIT_FAILURE, why);
    };
    for q in questions {
        if let Err(e) = handle.ask(q).await {
            return fail(EXIT_USAGE, e);
        }
    }
    let view = handle.wait_for(|v| v.answers.len() == questions.len() && v.answers.iter().all(|a| a.done)).await;
    handle.close();
    if view.degraded {
        eprintln!("roundtable: audit store unavailable; this review was not recorded");
    }
    let front = FrontMatter {
        proposal_id,
        title,
        overall_risk: report.overall_risk,
        exit_code: review::exit_code(report.overall_risk),
        report,
        answers: view.answers,
    };
    let rendered = review::render(&front);
    if let Some(p) = events {
        if let Err(e) = std::fs::write(p, handle.log().to_jsonl()) {
            return fail(EXIT_FAILURE, format!("{}: {e}", p.display()));
        }
    }
    match out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, rendered) {
                return fail(EXIT_FAILURE, format!("{}: {e}", p.display()));
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::from(front.exit_code as u8)
}

fn replay(path: &Path, sse: bool) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
    };
    let log = match EventLog::from_jsonl(&text) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_FAILURE, format!("{}: {e}", path.display())),
    };
    for e in log.snapshot() {
        let line = serde_json::to_string(&e).expect("events serialize");
        if sse {
            println!("id: {}\nevent: {}\ndata: {line}\n", e.seq, e.payload.kind());
        } else {
            println!("{line}");
        }
    }
    ExitCode::SUCCESS
}

fn record(root: &Path, only: Option<String>) -> ExitCode {
    let scenarios = match Scenario::discover(root) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    // A paused runtime makes the simulated clock drive every timestamp.
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .start_paused(true)
        .build()
        .expect("tokio runtime");
    for s in scenarios.iter().filter(|s| only.as_ref().is_none_or(|o| *o == s.name)) {
        match rt.block_on(fixtures::record(s)) {
            Ok(n) => println!("{}: {n} streams recorded", s.name),
            Err(e) => return fail(EXIT_FAILURE, format!("{}: {e}", s.name)),
        }
    }
    ExitCode::SUCCESS
}

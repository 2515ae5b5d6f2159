//! Command-line front end.
//!
//! Exit codes: 0 success, 1 lint errors (or an incomplete chart), 2 usage
//! errors and unknown documents, 3 provider and runtime failures.

use std::ffi::OsString;
use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use clap::{Parser, Subcommand, ValueEnum};
use playbook_core::{
    build_ref_graph, emit_mermaid, transitive_refs, DocId, IncidentSession, LintReport,
    PlaybookDoc, SessionError, Severity, StepRequest, VersionPart,
};

use crate::api::{self, AppState, LintBody};
use crate::assist::{AssistContext, AssistError, Assistant, ProviderConfig, SopProposal};
use crate::clock::{Clock, ScriptedClock, SystemClock};
use crate::export::export_log;
use crate::sessions::{ServiceError, SessionManager};
use crate::store::{load_repository, RepositoryStore, StoreError};
use crate::tabletop::{self, Stop};

pub const EXIT_OK: i32 = 0;
pub const EXIT_LINT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "playbook",
    version,
    about = "Incident-response playbook tooling"
)]
struct Cli {
    /// Repository directory holding the `.playbook` files.
    #[arg(long, env = "PLAYBOOK_ROOT", default_value = ".", global = true)]
    root: PathBuf,
    /// Date to use as today (YYYY-MM-DD); defaults to the local date.
    #[arg(long, global = true)]
    today: Option<NaiveDate>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    /// JSON, readable back as a lint report.
    #[value(alias = "json")]
    Structured,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every document; exits 1 when any error is found.
    Lint {
        #[arg(long, default_value_t = playbook_core::lint::DEFAULT_STALE_AFTER_DAYS)]
        stale_after: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// List a document's transitive references, or render its flowchart.
    Graph {
        #[arg(long)]
        doc: String,
        #[arg(long)]
        mermaid: bool,
    },
    /// Bump a version part or stamp today's review date.
    Version {
        doc: String,
        #[command(subcommand)]
        action: VersionAction,
    },
    /// LLM-assisted drafting and review.
    Assist(AssistArgs),
    /// Run an IRP headlessly, answering decisions from a script.
    Exec(ExecArgs),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, default_value_t = playbook_core::lint::DEFAULT_STALE_AFTER_DAYS)]
        stale_after: u32,
        #[command(flatten)]
        provider: ProviderArgs,
    },
}

#[derive(Debug, Subcommand)]
enum VersionAction {
    Bump {
        #[arg(value_parser = parse_part)]
        part: VersionPart,
    },
    Review,
}

fn parse_part(s: &str) -> Result<VersionPart, String> {
    s.parse::<VersionPart>().map_err(|e| e.to_string())
}

#[derive(Debug, clap::Args)]
struct ProviderArgs {
    /// Replay fixture responses instead of calling a model.
    #[arg(long, global = true)]
    mock: bool,
    /// Fixture directory for --mock.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Save live responses as fixtures in this directory.
    #[arg(long, global = true)]
    record_fixtures: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct AssistArgs {
    #[command(flatten)]
    provider: ProviderArgs,
    /// Technology in use (repeatable).
    #[arg(long = "tech", global = true)]
    tech: Vec<String>,
    /// Compliance regimes (repeatable).
    #[arg(long = "compliance", global = true)]
    compliance: Vec<String>,
    #[arg(long, global = true)]
    notes: Option<String>,
    #[command(subcommand)]
    op: AssistOp,
}

#[derive(Debug, Subcommand)]
enum AssistOp {
    /// Propose SOP titles for the environment.
    Enumerate,
    /// Propose SOPs, then rank the top n.
    Prioritize {
        #[arg(short = 'n', long, default_value_t = 3)]
        n: usize,
    },
    /// Draft an IRP and write it as `irp_<scenario>-draft`.
    Draft {
        #[arg(long)]
        scenario: String,
    },
    /// Rank candidate SOPs against existing documents.
    Gaps {
        /// `Title` or `Title: description` (repeatable).
        #[arg(long = "candidate", required = true)]
        candidates: Vec<String>,
        /// Existing document ids; all SOPs when omitted (repeatable).
        #[arg(long = "existing")]
        existing: Vec<String>,
    },
    /// Comment on a recorded incident session.
    Postmortem {
        #[arg(long)]
        session: String,
    },
}

#[derive(Debug, clap::Args)]
struct ExecArgs {
    irp: String,
    /// Comma-separated decision answers, used in order.
    #[arg(long, value_delimiter = ',')]
    script: Option<Vec<String>>,
    #[arg(long, default_value = "responder")]
    actor: String,
    /// Time of the first event (RFC 3339); defaults to now.
    #[arg(long)]
    start_time: Option<DateTime<FixedOffset>>,
    /// Minutes between consecutive events.
    #[arg(long, default_value_t = 1)]
    step_minutes: i64,
    /// Keep the session journal in the repository so it can be reviewed later.
    #[arg(long)]
    record: bool,
}

/// A failure with its exit code, reported on stderr.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(err: StoreError) -> Self {
        let code = match err {
            StoreError::RootNotFound(_) | StoreError::UnknownDoc(_) => EXIT_USAGE,
            StoreError::LintRejected { .. } => EXIT_LINT,
            _ => EXIT_RUNTIME,
        };
        let mut message = err.to_string();
        if let StoreError::LintRejected { findings, .. } = &err {
            for f in findings {
                message.push_str(&format!("\n  {f}"));
            }
        }
        Failure { code, message }
    }
}

impl From<AssistError> for Failure {
    fn from(err: AssistError) -> Self {
        let code = match err {
            AssistError::InvalidRequest(_)
            | AssistError::NotEnoughProposals { .. }
            | AssistError::Config(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        let mut message = err.to_string();
        if let Some(raw) = err.raw() {
            message.push_str("\n--- raw response ---\n");
            message.push_str(raw);
        }
        Failure { code, message }
    }
}

impl From<ServiceError> for Failure {
    fn from(err: ServiceError) -> Self {
        let code = match &err {
            ServiceError::UnknownDoc(_) | ServiceError::UnknownSession(_) => EXIT_USAGE,
            ServiceError::Session(e) => session_exit(e),
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn session_exit(err: &SessionError) -> i32 {
    match err {
        SessionError::IncompleteChart(_) => EXIT_LINT,
        SessionError::NotAnIrp(_) | SessionError::MissingFlowchart(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
/// Must not be called from inside an async runtime.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let today = cli.today.unwrap_or_else(|| SystemClock.today());
    let result = match cli.command {
        Command::Lint {
            stale_after,
            format,
        } => cmd_lint(&cli.root, today, stale_after, format, out),
        Command::Graph { doc, mermaid } => cmd_graph(&cli.root, &doc, mermaid, out),
        Command::Version { doc, action } => cmd_version(&cli.root, &doc, action, today, out),
        Command::Assist(args) => cmd_assist(&cli.root, args, today, out),
        Command::Exec(args) => cmd_exec(&cli.root, args, out, err),
        Command::Serve {
            bind,
            stale_after,
            provider,
        } => cmd_serve(&cli.root, &bind, stale_after, provider, err),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::runtime(format!("writing output: {e}"))
}

fn cmd_lint(
    root: &Path,
    today: NaiveDate,
    stale_after: u32,
    format: Format,
    out: &mut dyn Write,
) -> Outcome {
    let (_, report) = load_repository(root, today, stale_after)?;
    match format {
        Format::Text => {
            out.write_all(report.to_text().as_bytes())
                .map_err(io_failure)?;
            writeln!(
                out,
                "{} error(s), {} warning(s), {} info",
                report.count(Severity::Error),
                report.count(Severity::Warning),
                report.count(Severity::Info)
            )
            .map_err(io_failure)?;
        }
        Format::Structured => {
            let body = LintBody {
                has_errors: report.has_errors(),
                findings: report.findings().to_vec(),
            };
            let text = serde_json::to_string_pretty(&body).expect("report serializes");
            writeln!(out, "{text}").map_err(io_failure)?;
        }
    }
    Ok(if report.has_errors() {
        EXIT_LINT
    } else {
        EXIT_OK
    })
}

/// Reads back `lint --format structured` output.
pub fn parse_structured_lint(text: &str) -> Result<LintReport, serde_json::Error> {
    let body: LintBody = serde_json::from_str(text)?;
    Ok(LintReport::new(body.findings))
}

fn cmd_graph(root: &Path, doc: &str, mermaid: bool, out: &mut dyn Write) -> Outcome {
    let store = RepositoryStore::open(root)?;
    let found = store
        .get(doc)
        .ok_or_else(|| Failure::usage(format!("unknown document `{doc}`")))?;
    if mermaid {
        let chart = found
            .flowchart
            .as_ref()
            .ok_or_else(|| Failure::usage(format!("`{doc}` has no flowchart")))?;
        out.write_all(emit_mermaid(chart).as_bytes())
            .map_err(io_failure)?;
        return Ok(EXIT_OK);
    }
    let graph = build_ref_graph(&store.documents()).map_err(|e| Failure {
        code: EXIT_LINT,
        message: e.to_string(),
    })?;
    let refs = transitive_refs(&graph, &found.id).map_err(|e| Failure {
        code: EXIT_LINT,
        message: e.to_string(),
    })?;
    for id in refs {
        writeln!(out, "{id}").map_err(io_failure)?;
    }
    Ok(EXIT_OK)
}

fn cmd_version(
    root: &Path,
    doc: &str,
    action: VersionAction,
    today: NaiveDate,
    out: &mut dyn Write,
) -> Outcome {
    let store = RepositoryStore::open(root)?;
    let current = store
        .get(doc)
        .ok_or_else(|| Failure::usage(format!("unknown document `{doc}`")))?;
    let next = match action {
        VersionAction::Bump { part } => current.version.bump(part, today),
        VersionAction::Review => current
            .version
            .stamp_reviewed(today)
            .map_err(|e| Failure::usage(e.to_string()))?,
    };
    if next != current.version {
        let updated = PlaybookDoc {
            version: next,
            ..current.clone()
        };
        store.save_document(&updated, Some(&current.version))?;
    }
    writeln!(out, "{next}").map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::runtime(format!("starting runtime: {e}")))
}

fn provider_config(root: &Path, args: &ProviderArgs) -> Result<ProviderConfig, Failure> {
    let mut config = ProviderConfig::load(&root.join(crate::assist::config::CONFIG_FILE))?;
    let relative = |p: PathBuf| if p.is_relative() { root.join(p) } else { p };
    config.mock_fixture_dir = config.mock_fixture_dir.map(relative);
    config.record_fixture_dir = config.record_fixture_dir.map(relative);
    if args.mock {
        config.mock_mode = true;
    }
    if let Some(dir) = &args.fixtures {
        config.mock_fixture_dir = Some(dir.clone());
    }
    if let Some(dir) = &args.record_fixtures {
        config.record_fixture_dir = Some(dir.clone());
    }
    Ok(config)
}

fn parse_candidate(text: &str) -> SopProposal {
    match text.split_once(": ") {
        Some((title, description)) => SopProposal::new(title.trim(), description.trim()),
        None => SopProposal::new(text.trim(), ""),
    }
}

fn cmd_assist(root: &Path, args: AssistArgs, today: NaiveDate, out: &mut dyn Write) -> Outcome {
    let config = provider_config(root, &args.provider)?;
    let assistant = Assistant::from_config(&config)?;
    let ctx = AssistContext {
        tech_stack: args.tech,
        compliance: args.compliance,
        org_notes: args.notes,
    };
    let rt = runtime()?;
    let mut text = String::new();
    match args.op {
        AssistOp::Enumerate => {
            let found = rt.block_on(assistant.enumerate_sops(&ctx))?;
            for (i, p) in found.value.iter().enumerate() {
                text.push_str(&line_item(&(i + 1).to_string(), &p.title, &p.description));
            }
        }
        AssistOp::Prioritize { n } => {
            let proposals = rt.block_on(assistant.enumerate_sops(&ctx))?.value;
            let ranked = rt.block_on(assistant.prioritize(&proposals, n, &ctx))?;
            for r in &ranked.value {
                text.push_str(&line_item(
                    &r.rank.to_string(),
                    &r.proposal.title,
                    &r.rationale,
                ));
            }
        }
        AssistOp::Gaps {
            candidates,
            existing,
        } => {
            let store = RepositoryStore::open(root)?;
            let existing: Vec<PlaybookDoc> = if existing.is_empty() {
                store
                    .documents()
                    .into_iter()
                    .filter(|d| !d.is_irp())
                    .collect()
            } else {
                existing
                    .iter()
                    .map(|id| {
                        store
                            .get(id)
                            .ok_or_else(|| Failure::usage(format!("unknown document `{id}`")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let candidates: Vec<SopProposal> =
                candidates.iter().map(|c| parse_candidate(c)).collect();
            let ranked = rt.block_on(assistant.gap_analysis(&existing, &candidates, &ctx))?;
            for r in &ranked.value {
                text.push_str(&line_item(
                    &r.rank.to_string(),
                    &r.proposal.title,
                    &r.rationale,
                ));
            }
        }
        AssistOp::Draft { scenario } => {
            let store = RepositoryStore::open(root)?;
            let mut draft = rt
                .block_on(assistant.draft_irp(&scenario, &ctx, today))?
                .value;
            // Never overwrite: take the first free `-draft`, `-draft2`, ... id.
            let base = draft.id.to_string();
            let mut n = 1;
            while store.contains(draft.id.as_str()) {
                n += 1;
                draft.id = DocId::new(format!("{base}{n}")).expect("suffix keeps the id valid");
            }
            store.save_document(&draft, None)?;
            let path = store.path_of(draft.id.as_str()).expect("just saved");
            text.push_str(&format!(
                "{} {} -> {}\n",
                draft.id,
                draft.version,
                path.display()
            ));
        }
        AssistOp::Postmortem { session } => {
            let store = Arc::new(RepositoryStore::open(root)?);
            let sessions = SessionManager::open(store, Arc::new(SystemClock))?;
            let session = sessions.get(&session)?;
            let review = rt
                .block_on(assistant.postmortem_commentary(&session, &ctx))?
                .value;
            text.push_str("Commentary:\n");
            for (i, c) in review.commentary.iter().enumerate() {
                text.push_str(&format!("{}. {c}\n", i + 1));
            }
            text.push_str("\nRecommendations:\n");
            for r in &review.recommendations {
                text.push_str(&format!("- {r}\n"));
            }
        }
    }
    out.write_all(text.as_bytes()).map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn line_item(marker: &str, title: &str, detail: &str) -> String {
    if detail.is_empty() {
        format!("{marker}. {title}\n")
    } else {
        format!("{marker}. {title}: {detail}\n")
    }
}

/// Decision answers from the script, or from the terminal when no script
/// was given.
fn answer_source(
    script: Option<Vec<String>>,
    err: &mut dyn Write,
) -> impl FnMut(&playbook_core::NodeId) -> Option<String> + '_ {
    let interactive = script.is_none() && std::io::stdin().is_terminal();
    let mut answers = script
        .unwrap_or_default()
        .into_iter()
        .map(|s| s.trim().to_string());
    move |node| {
        if interactive {
            let _ = write!(err, "answer for {node}: ");
            let _ = err.flush();
            let mut line = String::new();
            match std::io::stdin().lock().read_line(&mut line) {
                Ok(n) if n > 0 && !line.trim().is_empty() => Some(line.trim().to_string()),
                _ => None,
            }
        } else {
            answers.next()
        }
    }
}

fn cmd_exec(root: &Path, args: ExecArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    if args.step_minutes < 0 {
        return Err(Failure::usage("--step-minutes must not be negative"));
    }
    let store = Arc::new(RepositoryStore::open(root)?);
    let doc = store
        .get(&args.irp)
        .ok_or_else(|| Failure::usage(format!("unknown document `{}`", args.irp)))?;
    let start = args.start_time.unwrap_or_else(|| SystemClock.now());
    let clock = Arc::new(ScriptedClock::ticking(
        start,
        Duration::minutes(args.step_minutes),
    ));

    let opened = if args.record {
        let sessions = SessionManager::open(store.clone(), clock.clone())?;
        sessions
            .start(&args.irp, &args.actor)
            .map(|s| (s, Some(sessions)))
    } else {
        IncidentSession::open("tabletop", &doc, &args.actor, clock.now())
            .map(|s| (s, None))
            .map_err(ServiceError::from)
    };
    let (session, sessions) = match opened {
        Ok(pair) => pair,
        Err(ServiceError::Session(SessionError::IncompleteChart(report))) => {
            for f in &report.findings {
                writeln!(out, "{} {} {}: {}", f.severity, f.code, f.node, f.detail)
                    .map_err(io_failure)?;
            }
            return Err(Failure {
                code: EXIT_LINT,
                message: format!("`{}` cannot run: its flowchart is incomplete", args.irp),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let chart = doc.flowchart.clone().expect("open checked the flowchart");
    let session_id = session.session_id.clone();

    let mut local = session.clone();
    let actor = args.actor.clone();
    let mut answers = answer_source(args.script, err);
    let result = tabletop::run(
        &chart,
        session,
        &actor,
        &mut answers,
        |step: &StepRequest| match &sessions {
            Some(manager) => manager.step(&session_id, step),
            None => {
                local
                    .record_step(&chart, step, clock.now())
                    .map_err(ServiceError::from)?;
                Ok(local.clone())
            }
        },
    );
    drop(answers);

    let (session, stop) = result?;
    out.write_all(export_log(&session).as_bytes())
        .map_err(io_failure)?;
    if sessions.is_some() {
        writeln!(err, "session {}", session.session_id).map_err(io_failure)?;
    }
    match stop {
        Stop::ScriptExhausted(node) => Err(Failure::runtime(format!(
            "script ran out of answers at decision {node}"
        ))),
        Stop::Done if session.status == playbook_core::SessionStatus::Complete => Ok(EXIT_OK),
        Stop::Done => Err(Failure::runtime(format!(
            "session ended {}",
            session.status
        ))),
    }
}

fn cmd_serve(
    root: &Path,
    bind: &str,
    stale_after: u32,
    provider: ProviderArgs,
    err: &mut dyn Write,
) -> Outcome {
    let store = Arc::new(RepositoryStore::open(root)?);
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let sessions = Arc::new(SessionManager::open(store.clone(), clock.clone())?);
    let assistant =
        match provider_config(root, &provider).and_then(|c| Ok(Assistant::from_config(&c)?)) {
            Ok(a) => Some(a),
            Err(f) => {
                let _ = writeln!(err, "warning: assistance disabled: {}", f.message);
                None
            }
        };
    let state = AppState {
        store,
        sessions,
        clock,
        assistant,
        stale_after_days: stale_after,
    };
    let rt = runtime()?;
    rt.block_on(async {
        let listener = api::bind(bind)
            .await
            .map_err(|e| Failure::runtime(e.to_string()))?;
        if let Some(addr) = api::local_addr(&listener) {
            let _ = writeln!(err, "listening on http://{addr}");
        }
        api::serve(listener, state, api::shutdown_signal())
            .await
            .map_err(|e| Failure::runtime(e.to_string()))
    })?;
    Ok(EXIT_OK)
}

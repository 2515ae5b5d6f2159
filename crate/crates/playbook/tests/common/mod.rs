//! Fixture repositories, the canonical assistance requests and the
//! stolen-device incident timeline shared by the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Duration, FixedOffset};
use playbook::assist::{requests, AssistContext, PromptRequest, SopProposal};
use playbook::clock::ScriptedClock;
use playbook::sessions::SessionManager;
use playbook::store::RepositoryStore;
use playbook_core::{parse_document, IncidentSession, PlaybookDoc, StepRequest};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn llm_fixture_dir() -> PathBuf {
    fixtures_dir().join("llm")
}

pub fn response(name: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join("responses").join(name)).unwrap()
}

/// A temporary copy of `fixtures/<name>`.
pub fn copy_repo(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_into(name, dir.path());
    dir
}

pub fn copy_into(name: &str, target: &Path) {
    for entry in std::fs::read_dir(fixtures_dir().join(name)).unwrap() {
        let path = entry.unwrap().path();
        std::fs::copy(&path, target.join(path.file_name().unwrap())).unwrap();
    }
}

pub fn fixture_doc(dir: &str, file: &str) -> PlaybookDoc {
    let path = fixtures_dir().join(dir).join(file);
    parse_document(&std::fs::read_to_string(&path).unwrap(), file).unwrap()
}

pub fn at(rfc3339: &str) -> DateTime<FixedOffset> {
    DateTime::parse_from_rfc3339(rfc3339).unwrap()
}

// ---------------------------------------------------------------------------
// Canonical assistance inputs.

pub fn ad_context() -> AssistContext {
    AssistContext {
        tech_stack: vec!["Microsoft Active Directory".into()],
        ..AssistContext::default()
    }
}

pub const DRAFT_SCENARIO: &str = "stolen device (laptop, phone, etc.)";

pub fn draft_context() -> AssistContext {
    AssistContext {
        tech_stack: vec![
            "BitLocker".into(),
            "Active Directory".into(),
            "Windows laptops".into(),
            "iPhone and Android phones".into(),
        ],
        ..AssistContext::default()
    }
}

pub fn gap_candidates() -> Vec<SopProposal> {
    vec![
        SopProposal::new("Reset MFA", ""),
        SopProposal::new("Reset Password v2", ""),
    ]
}

pub fn gap_existing() -> Vec<PlaybookDoc> {
    vec![fixture_doc("stolen_device", "sop_3.playbook")]
}

/// Every fixture response with the request it answers.
pub fn llm_cases() -> Vec<(&'static str, PromptRequest)> {
    let proposals = playbook::assist::parse_proposals(&response("enumerate_ad.txt")).unwrap();
    vec![
        (
            "enumerate_ad.txt",
            requests::enumerate(&ad_context()).unwrap(),
        ),
        (
            "prioritize_ad.txt",
            requests::prioritize(&proposals, 3, &ad_context()).unwrap(),
        ),
        (
            "draft_stolen_device.txt",
            requests::draft(DRAFT_SCENARIO, &draft_context()).unwrap(),
        ),
        (
            "gaps_reset_mfa.txt",
            requests::gaps(
                &gap_existing(),
                &gap_candidates(),
                &AssistContext::default(),
            )
            .unwrap(),
        ),
        (
            "postmortem_stolen_device.txt",
            requests::postmortem(&stolen_device_session(), &AssistContext::default()).unwrap(),
        ),
    ]
}

// ---------------------------------------------------------------------------
// The stolen-device timeline: five events between 09:00 and 09:30.

pub fn timeline() -> Vec<DateTime<FixedOffset>> {
    ["09:00", "09:05", "09:10", "09:15", "09:30"]
        .iter()
        .map(|t| at(&format!("2024-01-07T{t}:00-05:00")))
        .collect()
}

pub fn timeline_steps() -> Vec<StepRequest> {
    let note = |text: &str| StepRequest {
        node: None,
        decision: None,
        note: text.into(),
        actor: "Bob".into(),
    };
    vec![
        note("Reviewing the Remote Wipe SOP before running it."),
        note("Remote Wipe SOP is out of date: the device management console has changed."),
        note("Remote wipe started on the stolen device after working through the new console."),
        StepRequest {
            node: Some("SOP_3".into()),
            decision: None,
            note: "Password of the device owner's account changed.".into(),
            actor: "Bob".into(),
        },
    ]
}

/// The timeline replayed directly on the library types.
pub fn stolen_device_session() -> IncidentSession {
    let doc = fixture_doc("stolen_device", "irp_sd.playbook");
    let chart = doc.flowchart.clone().unwrap();
    let times = timeline();
    let mut session = IncidentSession::open("stolen-device", &doc, "Bob", times[0]).unwrap();
    for (step, now) in timeline_steps().iter().zip(&times[1..]) {
        session.record_step(&chart, step, *now).unwrap();
    }
    session
}

/// The timeline recorded through a session manager on `root`, so it is
/// journaled; returns the session id.
pub fn record_stolen_device_session(root: &Path) -> String {
    let store = Arc::new(RepositoryStore::open(root).unwrap());
    let clock = Arc::new(ScriptedClock::new(timeline(), Duration::minutes(1)));
    let manager = SessionManager::open(store, clock).unwrap();
    let session = manager.start("irp_sd", "Bob").unwrap();
    for step in timeline_steps() {
        manager.step(&session.session_id, &step).unwrap();
    }
    session.session_id
}

/// Runs the CLI in-process.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["playbook"];
    argv.extend_from_slice(args);
    let code = playbook::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

// ---------------------------------------------------------------------------
// A real HTTP server on an ephemeral port.

pub struct TestServer {
    pub base: String,
    pub state: playbook::api::AppState,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<tokio::task::JoinHandle<()>>,
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(handle) = self.handle.take() {
            handle.await.unwrap();
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// The clock used by served repositories: 2024-01-07 from 09:00, one minute
/// per reading.
pub fn service_clock() -> Arc<ScriptedClock> {
    Arc::new(ScriptedClock::ticking(
        at("2024-01-07T09:00:00-05:00"),
        Duration::minutes(1),
    ))
}

/// An assistant answering from the blessed fixture responses.
pub fn mock_assistant() -> playbook::assist::Assistant {
    playbook::assist::Assistant::new(
        Arc::new(playbook::assist::FixtureProvider::new(llm_fixture_dir())),
        std::time::Duration::from_secs(5),
    )
}

pub async fn spawn_server(
    root: &Path,
    clock: Arc<dyn playbook::clock::Clock>,
    assistant: Option<playbook::assist::Assistant>,
) -> TestServer {
    let store = Arc::new(RepositoryStore::open(root).unwrap());
    let sessions = Arc::new(SessionManager::open(store.clone(), clock.clone()).unwrap());
    let state = playbook::api::AppState {
        store,
        sessions,
        clock,
        assistant,
        stale_after_days: playbook_core::lint::DEFAULT_STALE_AFTER_DAYS,
    };
    let listener = playbook::api::bind("127.0.0.1:0").await.unwrap();
    let addr = playbook::api::local_addr(&listener).unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let served = state.clone();
    let handle = tokio::spawn(async move {
        playbook::api::serve(listener, served, async {
            let _ = rx.await;
        })
        .await
        .unwrap();
    });
    TestServer {
        base: format!("http://{addr}"),
        state,
        shutdown: Some(tx),
        handle: Some(handle),
    }
}

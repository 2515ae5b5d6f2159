//! Incident session lifecycle with an append-only journal per session.
//!
//! Each session lives in `<root>/.sessions/<id>.jsonl`. The first record
//! snapshots the session and the chart it runs, later records hold the
//! requested step and the event it produced. On startup the journals are
//! replayed through the same transition code; a torn final line (a write cut
//! short by a crash) is ignored.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, FixedOffset};
use playbook_core::{
    Flowchart, IncidentEvent, IncidentSession, SessionError, SessionStatus, StepRequest,
};
use serde::{Deserialize, Serialize};
use tokio::sync::Notify;

use crate::clock::Clock;
use crate::store::RepositoryStore;

pub const SESSIONS_DIR: &str = ".sessions";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown document `{0}`")]
    UnknownDoc(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("journal {}: line {line}: {detail}", .path.display())]
    CorruptJournal {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownDoc(_) => "UnknownDoc",
            ServiceError::UnknownSession(_) => "UnknownSession",
            ServiceError::Session(e) => e.code(),
            ServiceError::CorruptJournal { .. } => "CorruptJournal",
            ServiceError::Io { .. } => "IoError",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum JournalRecord {
    Open {
        session: IncidentSession,
        chart: Flowchart,
    },
    Step {
        step: StepRequest,
        event: IncidentEvent,
    },
    Abort {
        actor: String,
        reason: String,
        event: IncidentEvent,
    },
}

struct SlotState {
    session: IncidentSession,
    chart: Flowchart,
    journal: File,
    path: PathBuf,
}

impl SlotState {
    fn append(&mut self, record: &JournalRecord) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(record).expect("journal records serialize");
        line.push('\n');
        self.journal
            .write_all(line.as_bytes())
            .and_then(|()| self.journal.sync_data())
            .map_err(io_err(&self.path))
    }
}

/// One session: a single writer at a time, plus a wake-up for long polls.
struct Slot {
    state: Mutex<SlotState>,
    changed: Notify,
}

/// New events after a cursor, as returned by [`SessionManager::events_since`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventBatch {
    pub events: Vec<IncidentEvent>,
    /// Pass back as `since` to continue where this batch ended.
    pub cursor: usize,
    pub status: SessionStatus,
}

pub struct SessionManager {
    store: Arc<RepositoryStore>,
    clock: Arc<dyn Clock>,
    dir: PathBuf,
    slots: RwLock<BTreeMap<String, Arc<Slot>>>,
}

impl std::fmt::Debug for SessionManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionManager")
            .field("dir", &self.dir)
            .finish_non_exhaustive()
    }
}

impl SessionManager {
    /// Replays every journal under the store's session directory.
    pub fn open(store: Arc<RepositoryStore>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let dir = store.root().join(SESSIONS_DIR);
        let mut slots = BTreeMap::new();
        if dir.is_dir() {
            let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(io_err(&dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            paths.sort();
            for path in paths {
                let state = replay(&path)?;
                let id = state.session.session_id.clone();
                slots.insert(
                    id,
                    Arc::new(Slot {
                        state: Mutex::new(state),
                        changed: Notify::new(),
                    }),
                );
            }
        }
        Ok(SessionManager {
            store,
            clock,
            dir,
            slots: RwLock::new(slots),
        })
    }

    pub fn store(&self) -> &Arc<RepositoryStore> {
        &self.store
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        self.slots
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// The clock's reading, never earlier than the session's last event.
    fn now_for(&self, session: &IncidentSession) -> DateTime<FixedOffset> {
        let now = self.clock.now();
        match session.log.last() {
            Some(last) if last.timestamp > now => last.timestamp,
            _ => now,
        }
    }

    /// Opens a new session on `irp`.
    pub fn start(&self, irp: &str, actor: &str) -> Result<IncidentSession, ServiceError> {
        let doc = self
            .store
            .get(irp)
            .ok_or_else(|| ServiceError::UnknownDoc(irp.to_string()))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = IncidentSession::open(id.clone(), &doc, actor, self.clock.now())?;
        let chart = doc.flowchart.clone().expect("open checked the flowchart");

        fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))?;
        let path = self.dir.join(format!("{id}.jsonl"));
        let journal = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let mut state = SlotState {
            session: session.clone(),
            chart: chart.clone(),
            journal,
            path,
        };
        state.append(&JournalRecord::Open {
            session: session.clone(),
            chart,
        })?;
        self.slots.write().unwrap().insert(
            id,
            Arc::new(Slot {
                state: Mutex::new(state),
                changed: Notify::new(),
            }),
        );
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<IncidentSession, ServiceError> {
        Ok(self.slot(id)?.state.lock().unwrap().session.clone())
    }

    /// The session together with the chart it runs.
    pub fn get_with_chart(&self, id: &str) -> Result<(IncidentSession, Flowchart), ServiceError> {
        let slot = self.slot(id)?;
        let state = slot.state.lock().unwrap();
        Ok((state.session.clone(), state.chart.clone()))
    }

    pub fn list(&self) -> Vec<IncidentSession> {
        let slots: Vec<Arc<Slot>> = self.slots.read().unwrap().values().cloned().collect();
        slots
            .iter()
            .map(|s| s.state.lock().unwrap().session.clone())
            .collect()
    }

    /// Applies one step. The journal is written before the in-memory session
    /// changes, so a failed write leaves both untouched.
    pub fn step(&self, id: &str, step: &StepRequest) -> Result<IncidentSession, ServiceError> {
        let slot = self.slot(id)?;
        let mut state = slot.state.lock().unwrap();
        let mut next = state.session.clone();
        let now = self.now_for(&next);
        let event = next.record_step(&state.chart, step, now)?.clone();
        state.append(&JournalRecord::Step {
            step: step.clone(),
            event,
        })?;
        state.session = next;
        drop(state);
        slot.changed.notify_waiters();
        self.get(id)
    }

    pub fn abort(
        &self,
        id: &str,
        actor: &str,
        reason: &str,
    ) -> Result<IncidentSession, ServiceError> {
        let slot = self.slot(id)?;
        let mut state = slot.state.lock().unwrap();
        let mut next = state.session.clone();
        let now = self.now_for(&next);
        let event = next.abort(actor, reason, now)?.clone();
        state.append(&JournalRecord::Abort {
            actor: actor.to_string(),
            reason: reason.to_string(),
            event,
        })?;
        state.session = next;
        let snapshot = state.session.clone();
        drop(state);
        slot.changed.notify_waiters();
        Ok(snapshot)
    }

    /// Events with index `>= since`. If there are none and the session is
    /// still active, waits up to `wait` for one to arrive.
    pub async fn events_since(
        &self,
        id: &str,
        since: usize,
        wait: Duration,
    ) -> Result<EventBatch, ServiceError> {
        let slot = self.slot(id)?;
        let deadline = tokio::time::Instant::now() + wait;
        loop {
            let notified = slot.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            {
                let state = slot.state.lock().unwrap();
                let log = &state.session.log;
                let status = state.session.status;
                if log.len() > since || status != SessionStatus::Active {
                    let start = since.min(log.len());
                    return Ok(EventBatch {
                        events: log[start..].to_vec(),
                        cursor: log.len(),
                        status,
                    });
                }
            }
            if tokio::time::timeout_at(deadline, notified).await.is_err() {
                let state = slot.state.lock().unwrap();
                return Ok(EventBatch {
                    events: Vec::new(),
                    cursor: since,
                    status: state.session.status,
                });
            }
        }
    }
}

/// Rebuilds a session from its journal, re-running every step.
fn replay(path: &Path) -> Result<SlotState, ServiceError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let corrupt = |line: usize, detail: String| ServiceError::CorruptJournal {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let mut records = Vec::new();
    let mut valid_len = 0;
    for (i, raw) in lines.iter().enumerate() {
        match serde_json::from_str::<JournalRecord>(raw.trim_end_matches('\n')) {
            Ok(record) if raw.ends_with('\n') => {
                records.push(record);
                valid_len += raw.len();
            }
            // Only the final line may be torn.
            _ if i + 1 == lines.len() => break,
            Ok(_) => unreachable!("only the last line can lack a newline"),
            Err(e) => return Err(corrupt(i + 1, e.to_string())),
        }
    }

    let mut records = records.into_iter();
    let Some(JournalRecord::Open { session, chart }) = records.next() else {
        return Err(corrupt(
            1,
            "journal does not start with an open record".into(),
        ));
    };
    let mut session = session;
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let (produced, stored) = match record {
            JournalRecord::Open { .. } => return Err(corrupt(line, "second open record".into())),
            JournalRecord::Step { step, event } => {
                let produced = session
                    .record_step(&chart, &step, event.timestamp)
                    .map_err(|e| corrupt(line, e.to_string()))?
                    .clone();
                (produced, event)
            }
            JournalRecord::Abort {
                actor,
                reason,
                event,
            } => {
                let produced = session
                    .abort(&actor, &reason, event.timestamp)
                    .map_err(|e| corrupt(line, e.to_string()))?
                    .clone();
                (produced, event)
            }
        };
        if produced != stored {
            return Err(corrupt(
                line,
                "replayed event differs from the journal".into(),
            ));
        }
    }

    // Drop a torn tail so later appends start on a fresh line.
    if valid_len < text.len() {
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(io_err(path))?;
        file.set_len(valid_len as u64).map_err(io_err(path))?;
        file.sync_all().map_err(io_err(path))?;
    }
    let journal = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    Ok(SlotState {
        session,
        chart,
        journal,
        path: path.to_path_buf(),
    })
}

//! HTTP JSON API over the repository, sessions and assistance operations.
//!
//! Errors use one envelope, `{code, message, findings?, raw?}`: 400 for bad
//! input, 404 for unknown ids, 409 for state conflicts and 502/504 when the
//! model provider fails.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use playbook_core::{
    emit_mermaid, serialize_document, DocId, Flowchart, IncidentEvent, IncidentSession, NodeKind,
    PlaybookDoc, SessionError, SessionStatus, StepRequest, Version,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assist::{AssistContext, AssistError, Assistant, SopProposal};
use crate::clock::Clock;
use crate::export::export_log;
use crate::sessions::{EventBatch, ServiceError, SessionManager};
use crate::store::{RepositoryStore, StoreError};

/// Longest a client may ask `/events` to wait.
pub const MAX_EVENT_WAIT: Duration = Duration::from_secs(30);

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub findings: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                findings: None,
                raw: None,
            },
        }
    }

    fn with_findings(mut self, findings: impl Serialize) -> Self {
        self.body.findings = serde_json::to_value(findings).ok();
        self
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "InternalError", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        let status = match &err {
            StoreError::UnknownDoc(_) => StatusCode::NOT_FOUND,
            StoreError::InvalidDocument(_) | StoreError::LintRejected { .. } => {
                StatusCode::BAD_REQUEST
            }
            StoreError::VersionConflict { .. } => StatusCode::CONFLICT,
            StoreError::RootNotFound(_) | StoreError::Io { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        let api = ApiError::new(status, err.code(), err.to_string());
        match err {
            StoreError::LintRejected { findings, .. } => api.with_findings(findings),
            _ => api,
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(err: SessionError) -> Self {
        use playbook_core::ExecError;
        let status = match &err {
            SessionError::SessionNotActive(_)
            | SessionError::ClockRegression { .. }
            | SessionError::Exec(ExecError::NodeNotActive(_)) => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        let api = ApiError::new(status, err.code(), err.to_string());
        match err {
            SessionError::IncompleteChart(report) => api.with_findings(report.findings),
            _ => api,
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(err: ServiceError) -> Self {
        match err {
            ServiceError::Session(e) => e.into(),
            ServiceError::UnknownDoc(_) | ServiceError::UnknownSession(_) => {
                ApiError::new(StatusCode::NOT_FOUND, err.code(), err.to_string())
            }
            ServiceError::CorruptJournal { .. } | ServiceError::Io { .. } => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                err.code(),
                err.to_string(),
            ),
        }
    }
}

impl From<AssistError> for ApiError {
    fn from(err: AssistError) -> Self {
        let status = match &err {
            AssistError::InvalidRequest(_) | AssistError::NotEnoughProposals { .. } => {
                StatusCode::BAD_REQUEST
            }
            AssistError::ProviderTimeout(_) => StatusCode::GATEWAY_TIMEOUT,
            _ => StatusCode::BAD_GATEWAY,
        };
        let mut api = ApiError::new(status, err.code(), err.to_string());
        api.body.raw = err.raw().map(str::to_string);
        api
    }
}

/// `Json` whose rejections use the error envelope.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(ApiJson(value)),
            Err(rejection) => Err(ApiError::bad_request(
                "BadRequest",
                match rejection {
                    JsonRejection::JsonDataError(e) => e.body_text(),
                    other => other.body_text(),
                },
            )),
        }
    }
}

/// Shared handles for the request handlers.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<RepositoryStore>,
    pub sessions: Arc<SessionManager>,
    pub clock: Arc<dyn Clock>,
    /// `None` when no provider is configured; assist endpoints then fail.
    pub assistant: Option<Assistant>,
    pub stale_after_days: u32,
}

impl AppState {
    fn today(&self) -> NaiveDate {
        self.clock.today()
    }

    fn assistant(&self) -> Result<&Assistant, ApiError> {
        self.assistant.as_ref().ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_GATEWAY,
                "ProviderConfig",
                "no model provider is configured",
            )
        })
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/documents", get(list_documents))
        .route("/api/documents/{id}", get(get_document).put(put_document))
        .route("/api/documents/{id}/mermaid", get(get_mermaid))
        .route("/api/lint", post(lint))
        .route("/api/sessions", post(open_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/steps", post(post_step))
        .route("/api/sessions/{id}/abort", post(post_abort))
        .route("/api/sessions/{id}/log", get(get_log))
        .route("/api/sessions/{id}/events", get(get_events))
        .route("/api/assist/enumerate", post(assist_enumerate))
        .route("/api/assist/prioritize", post(assist_prioritize))
        .route("/api/assist/draft", post(assist_draft))
        .route("/api/assist/gaps", post(assist_gaps))
        .route("/api/assist/postmortem", post(assist_postmortem))
        .with_state(state)
}

// ---------------------------------------------------------------------------
// Documents

async fn list_documents(State(state): State<AppState>) -> Json<Value> {
    Json(
        serde_json::to_value(state.store.summaries(state.today(), state.stale_after_days)).unwrap(),
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DocumentView {
    pub document: PlaybookDoc,
    /// The document in its on-disk text form.
    pub source: String,
    pub stale: bool,
}

fn find_doc(state: &AppState, id: &str) -> Result<PlaybookDoc, ApiError> {
    state
        .store
        .get(id)
        .ok_or_else(|| StoreError::UnknownDoc(id.to_string()).into())
}

async fn get_document(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let doc = find_doc(&state, &id)?;
    let view = DocumentView {
        source: serialize_document(&doc),
        stale: doc.version.days_since_review(state.today()) > i64::from(state.stale_after_days),
        document: doc,
    };
    let etag = format!("\"{}\"", view.document.version);
    Ok(([(header::ETAG, etag)], Json(view)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SavedBody {
    pub id: DocId,
    pub version: Version,
}

/// `If-Match` carries the stored version the edit was based on; without it
/// the document must not exist yet.
async fn put_document(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(doc): ApiJson<PlaybookDoc>,
) -> Result<Response, ApiError> {
    if doc.id.as_str() != id {
        return Err(ApiError::bad_request(
            "IdMismatch",
            format!("path id `{id}` differs from document id `{}`", doc.id),
        ));
    }
    let expected = match headers.get(header::IF_MATCH) {
        None => None,
        Some(value) => {
            let text = value
                .to_str()
                .map_err(|_| ApiError::bad_request("BadIfMatch", "If-Match is not text"))?;
            let text = text.trim().trim_start_matches("W/").trim_matches('"');
            Some(text.parse::<Version>().map_err(|e| {
                ApiError::bad_request("BadIfMatch", format!("If-Match `{text}`: {e}"))
            })?)
        }
    };
    let created = expected.is_none();
    let store = state.store.clone();
    let version = blocking(move || Ok(store.save_document(&doc, expected.as_ref())?)).await?;
    let status = if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    let id = DocId::new(id).expect("matched a stored id");
    Ok((status, Json(SavedBody { id, version })).into_response())
}

async fn get_mermaid(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let doc = find_doc(&state, &id)?;
    let chart = doc.flowchart.as_ref().ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "MissingFlowchart",
            format!("`{id}` has no flowchart"),
        )
    })?;
    Ok((
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        emit_mermaid(chart),
    )
        .into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LintRequest {
    pub stale_after_days: Option<u32>,
    pub today: Option<NaiveDate>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LintBody {
    pub findings: Vec<playbook_core::LintFinding>,
    pub has_errors: bool,
}

/// Re-reads the repository from disk and lints it.
async fn lint(
    State(state): State<AppState>,
    body: axum::body::Bytes,
) -> Result<Json<LintBody>, ApiError> {
    // The body is optional.
    let request: LintRequest = if body.iter().all(u8::is_ascii_whitespace) {
        LintRequest::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::bad_request("BadRequest", e.to_string()))?
    };
    let store = state.store.clone();
    blocking(move || Ok(store.reload()?)).await?;
    let report = state.store.lint(
        request.today.unwrap_or_else(|| state.today()),
        request.stale_after_days.unwrap_or(state.stale_after_days),
    );
    Ok(Json(LintBody {
        has_errors: report.has_errors(),
        findings: report.findings().to_vec(),
    }))
}

// ---------------------------------------------------------------------------
// Sessions

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkedDoc {
    pub id: DocId,
    pub title: String,
    /// Markdown body.
    pub body: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontierNode {
    pub id: String,
    pub kind: NodeKind,
    pub label: String,
    /// Branch labels to choose from at a decision node.
    pub branches: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<LinkedDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub irp: DocId,
    pub irp_title: String,
    pub status: SessionStatus,
    pub started: chrono::DateTime<chrono::FixedOffset>,
    pub frontier: Vec<FrontierNode>,
    /// Number of log events; pass as `since` to `/events`.
    pub cursor: usize,
    pub log: Vec<IncidentEvent>,
}

fn session_view(state: &AppState, session: IncidentSession, chart: &Flowchart) -> SessionView {
    let frontier = session
        .frontier
        .iter()
        .filter_map(|id| chart.node(id.as_str()))
        .map(|node| FrontierNode {
            id: node.id.to_string(),
            kind: node.kind,
            label: node.label.clone(),
            branches: if node.kind == NodeKind::Decision {
                chart
                    .outgoing(node.id.as_str())
                    .filter_map(|e| e.label.clone())
                    .collect()
            } else {
                Vec::new()
            },
            doc: node
                .doc_ref
                .as_ref()
                .and_then(|r| state.store.get(r.as_str()))
                .map(|d| LinkedDoc {
                    id: d.id,
                    title: d.title,
                    body: d.body,
                }),
        })
        .collect();
    SessionView {
        session_id: session.session_id,
        irp: session.irp,
        irp_title: session.irp_title,
        status: session.status,
        started: session.started,
        frontier,
        cursor: session.log.len(),
        log: session.log,
    }
}

fn view_of(state: &AppState, id: &str) -> Result<SessionView, ApiError> {
    let (session, chart) = state.sessions.get_with_chart(id)?;
    Ok(session_view(state, session, &chart))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSessionRequest {
    pub irp: String,
    pub actor: String,
}

async fn open_session(
    State(state): State<AppState>,
    ApiJson(request): ApiJson<OpenSessionRequest>,
) -> Result<Response, ApiError> {
    let sessions = state.sessions.clone();
    let session = blocking(move || Ok(sessions.start(&request.irp, &request.actor)?)).await?;
    let view = view_of(&state, &session.session_id)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_sessions(State(state): State<AppState>) -> Json<Value> {
    let list: Vec<Value> = state
        .sessions
        .list()
        .into_iter()
        .map(|s| {
            serde_json::json!({
                "session_id": s.session_id,
                "irp": s.irp,
                "irp_title": s.irp_title,
                "status": s.status,
                "started": s.started,
                "events": s.log.len(),
            })
        })
        .collect();
    Json(Value::Array(list))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(view_of(&state, &id)?))
}

async fn post_step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(step): ApiJson<StepRequest>,
) -> Result<Json<SessionView>, ApiError> {
    let sessions = state.sessions.clone();
    let sid = id.clone();
    blocking(move || Ok(sessions.step(&sid, &step)?)).await?;
    Ok(Json(view_of(&state, &id)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbortRequest {
    pub actor: String,
    #[serde(default)]
    pub reason: String,
}

async fn post_abort(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(request): ApiJson<AbortRequest>,
) -> Result<Json<SessionView>, ApiError> {
    let sessions = state.sessions.clone();
    let sid = id.clone();
    blocking(move || Ok(sessions.abort(&sid, &request.actor, &request.reason)?)).await?;
    Ok(Json(view_of(&state, &id)?))
}

async fn get_log(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let session = state.sessions.get(&id)?;
    Ok((
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        export_log(&session),
    )
        .into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct EventsQuery {
    pub since: usize,
    /// Seconds to wait for new events; 0 returns immediately.
    pub wait: u64,
}

async fn get_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<EventsQuery>,
) -> Result<Json<EventBatch>, ApiError> {
    let wait = Duration::from_secs(query.wait).min(MAX_EVENT_WAIT);
    Ok(Json(
        state.sessions.events_since(&id, query.since, wait).await?,
    ))
}

// ---------------------------------------------------------------------------
// Assistance

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerateRequest {
    pub context: AssistContext,
}

async fn assist_enumerate(
    State(state): State<AppState>,
    ApiJson(request): ApiJson<EnumerateRequest>,
) -> Result<Json<Value>, ApiError> {
    let out = state.assistant()?.enumerate_sops(&request.context).await?;
    Ok(Json(serde_json::to_value(out).unwrap()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrioritizeRequest {
    pub proposals: Vec<SopProposal>,
    pub n: usize,
    #[serde(default)]
    pub context: AssistContext,
}

async fn assist_prioritize(
    State(state): State<AppState>,
    ApiJson(request): ApiJson<PrioritizeRequest>,
) -> Result<Json<Value>, ApiError> {
    let out = state
        .assistant()?
        .prioritize(&request.proposals, request.n, &request.context)
        .await?;
    Ok(Json(serde_json::to_value(out).unwrap()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DraftRequest {
    pub scenario: String,
    #[serde(default)]
    pub context: AssistContext,
}

/// Returns the draft without storing it.
async fn assist_draft(
    State(state): State<AppState>,
    ApiJson(request): ApiJson<DraftRequest>,
) -> Result<Json<Value>, ApiError> {
    let out = state
        .assistant()?
        .draft_irp(&request.scenario, &request.context, state.today())
        .await?;
    Ok(Json(serde_json::to_value(out).unwrap()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapsRequest {
    /// Ids of stored documents; all stored SOPs when omitted.
    #[serde(default)]
    pub existing: Option<Vec<String>>,
    pub candidates: Vec<SopProposal>,
    #[serde(default)]
    pub context: AssistContext,
}

async fn assist_gaps(
    State(state): State<AppState>,
    ApiJson(request): ApiJson<GapsRequest>,
) -> Result<Json<Value>, ApiError> {
    let existing = match &request.existing {
        Some(ids) => ids
            .iter()
            .map(|id| find_doc(&state, id))
            .collect::<Result<Vec<_>, _>>()?,
        None => state
            .store
            .documents()
            .into_iter()
            .filter(|d| !d.is_irp())
            .collect(),
    };
    let out = state
        .assistant()?
        .gap_analysis(&existing, &request.candidates, &request.context)
        .await?;
    Ok(Json(serde_json::to_value(out).unwrap()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostmortemRequest {
    pub session: String,
    #[serde(default)]
    pub context: AssistContext,
}

async fn assist_postmortem(
    State(state): State<AppState>,
    ApiJson(request): ApiJson<PostmortemRequest>,
) -> Result<Json<Value>, ApiError> {
    let session = state.sessions.get(&request.session)?;
    let out = state
        .assistant()?
        .postmortem_commentary(&session, &request.context)
        .await?;
    Ok(Json(serde_json::to_value(out).unwrap()))
}

// ---------------------------------------------------------------------------
// Serving

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: String,
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

pub async fn bind(addr: &str) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::BindFailure {
            addr: addr.to_string(),
            source,
        })
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {}
        () = term => {}
    }
}

pub fn local_addr(listener: &tokio::net::TcpListener) -> Option<SocketAddr> {
    listener.local_addr().ok()
}

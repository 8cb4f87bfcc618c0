//! JSON API over a loaded artifact.
//!
//! | method | path                    | body                               | reply                 |
//! |--------|-------------------------|------------------------------------|-----------------------|
//! | POST   | `/sessions`             |                                    | 201 [`SessionView`]   |
//! | GET    | `/sessions/{id}`        |                                    | [`SessionView`]       |
//! | POST   | `/sessions/{id}/answer` | `{"answer": "yes"\|"no"\|"maybe"}` | [`SessionView`]       |
//! | POST   | `/sessions/{id}/undo`   |                                    | [`SessionView`]       |
//! | POST   | `/sessions/{id}/finish` | `{"bespoke": [string]}` (optional) | [`FinishView`]        |
//! | GET    | `/stats`                |                                    | [`StatsView`]         |
//! | GET    | `/healthz`              |                                    | `{"status": "ok"}`    |
//!
//! Errors are `{"error": {"code": string, "message": string}}` with status
//! 400 (bad body), 404 (unknown or expired session), 409 (answer after
//! finish, undo at the root), 422 (nothing to query) or 503 (no artifact).

use std::collections::HashMap;
use std::future::Future;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use branchsearch_core::query::{EsearchClient, QueryError};
use branchsearch_core::session::SessionError;
use branchsearch_core::tree::LeafSummary;
use branchsearch_core::{leaf_size_histogram, local_search, render_query, Answer, Artifact, QuerySpec, Session};

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Idle time after which a session is dropped.
    pub session_ttl: Duration,
    /// Origins allowed by CORS; empty allows any origin.
    pub allowed_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { session_ttl: DEFAULT_SESSION_TTL, allowed_origins: Vec::new() }
    }
}

struct Handle {
    session: Session,
    created_at: u64,
    touched: Instant,
}

type SharedHandle = Arc<Mutex<Handle>>;

pub struct AppState {
    artifact: Option<Arc<Artifact>>,
    remote: Option<EsearchClient>,
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, SharedHandle>>,
}

impl AppState {
    pub fn new(artifact: Option<Arc<Artifact>>, remote: Option<EsearchClient>, config: ServiceConfig) -> Self {
        AppState { artifact, remote, config, sessions: Mutex::new(HashMap::new()) }
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table").len()
    }

    fn artifact(&self) -> Result<&Arc<Artifact>, ApiError> {
        self.artifact
            .as_ref()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_artifact", "no artifact loaded"))
    }

    fn purge_expired(&self, table: &mut HashMap<String, SharedHandle>) {
        let ttl = self.config.session_ttl;
        table.retain(|_, h| h.lock().map(|h| h.touched.elapsed() <= ttl).unwrap_or(false));
    }

    fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let handle = Handle { session, created_at, touched: Instant::now() };
        let mut table = self.sessions.lock().expect("session table");
        self.purge_expired(&mut table);
        table.insert(id.clone(), Arc::new(Mutex::new(handle)));
        id
    }

    fn lookup(&self, id: &str) -> Result<SharedHandle, ApiError> {
        let mut table = self.sessions.lock().expect("session table");
        self.purge_expired(&mut table);
        table
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session '{id}'")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::Finished => "session_finished",
            SessionError::NothingToUndo => "nothing_to_undo",
        };
        ApiError::new(StatusCode::CONFLICT, code, e.to_string())
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let code = match e {
            QueryError::Empty => "empty_query",
            QueryError::Contradiction(_) => "contradiction",
            QueryError::UnknownTerms(_) => "unknown_terms",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: ErrorDetail { code: self.code, message: &self.message } };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub term: String,
    /// 1-based question number.
    pub depth: u32,
    pub n_yes: u32,
    pub n_no: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepView {
    pub term: String,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub created_at: u64,
    pub depth: usize,
    pub max_questions: u32,
    pub path: Vec<StepView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<QuestionView>,
    pub finished: bool,
    pub remaining_count: usize,
}

impl SessionView {
    fn of(id: &str, handle: &Handle) -> Self {
        let s = &handle.session;
        let index = &s.artifact().index;
        SessionView {
            id: id.to_string(),
            created_at: handle.created_at,
            depth: s.depth(),
            max_questions: s.limit(),
            path: s
                .path()
                .iter()
                .map(|step| StepView { term: index.term_name(step.term).to_string(), answer: step.answer })
                .collect(),
            question: s.question().ok().map(|q| QuestionView {
                term: q.term,
                depth: q.depth,
                n_yes: q.n_yes,
                n_no: q.n_no,
            }),
            finished: s.is_finished(),
            remaining_count: s.remaining(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinishView {
    pub query_spec: QuerySpec,
    pub query_string: String,
    pub local_uids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_uids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub leaf_size: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsView {
    pub n_docs: usize,
    pub n_terms: usize,
    pub depth: u32,
    pub summary: LeafSummary,
    pub histogram: Vec<HistogramRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    answer: Answer,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FinishBody {
    #[serde(default)]
    bespoke: Vec<String>,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn create_session(State(state): State<Arc<AppState>>) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let artifact = state.artifact()?.clone();
    let id = state.insert(Session::start(artifact));
    let handle = state.lookup(&id)?;
    let view = SessionView::of(&id, &handle.lock().expect("session"));
    Ok((StatusCode::CREATED, Json(view)))
}

fn with_session<T>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut Handle) -> Result<T, ApiError>,
) -> Result<T, ApiError> {
    let handle = state.lookup(id)?;
    let mut handle = handle.lock().expect("session");
    handle.touched = Instant::now();
    f(&mut handle)
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    with_session(&state, &id, |h| Ok(Json(SessionView::of(&id, h))))
}

async fn answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let body: AnswerBody = parse_body(&body)?;
    with_session(&state, &id, |h| {
        h.session.answer(body.answer)?;
        Ok(Json(SessionView::of(&id, h)))
    })
}

async fn undo(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    with_session(&state, &id, |h| {
        h.session.undo()?;
        Ok(Json(SessionView::of(&id, h)))
    })
}

async fn finish(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<FinishView>, ApiError> {
    let body: FinishBody =
        if body.iter().all(u8::is_ascii_whitespace) { FinishBody::default() } else { parse_body(&body)? };
    let (spec, query_string, local_uids) = with_session(&state, &id, |h| {
        let spec = h.session.query_spec(body.bespoke);
        let query_string = render_query(&spec)?;
        let index = &h.session.artifact().index;
        let local_uids = local_search(index, &spec)?.into_iter().map(|d| index.uid(d).to_string()).collect();
        h.session.finish(spec.bespoke.clone());
        Ok((spec, query_string, local_uids))
    })?;
    let mut view = FinishView { query_spec: spec, query_string, local_uids, remote_uids: None, remote_error: None };
    if let Some(client) = state.remote.clone() {
        let spec = view.query_spec.clone();
        match tokio::task::spawn_blocking(move || client.esearch(&spec)).await {
            Ok(Ok(ids)) => view.remote_uids = Some(ids),
            Ok(Err(e)) => {
                log::warn!("remote search for session {id} failed: {e}");
                view.remote_error = Some(e.to_string());
            }
            Err(e) => view.remote_error = Some(format!("remote search aborted: {e}")),
        }
    }
    Ok(Json(view))
}

async fn stats(State(state): State<Arc<AppState>>) -> Result<Json<StatsView>, ApiError> {
    let artifact = state.artifact()?;
    let hist = leaf_size_histogram(&artifact.tree);
    Ok(Json(StatsView {
        n_docs: artifact.index.n_docs(),
        n_terms: artifact.index.n_terms(),
        depth: artifact.tree.depth(),
        summary: hist.summary,
        histogram: hist.counts.into_iter().map(|(leaf_size, count)| HistogramRow { leaf_size, count }).collect(),
    }))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

fn cors(origins: &[String]) -> CorsLayer {
    let allow = if origins.is_empty() {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors(&state.config.allowed_origins);
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/finish", post(finish))
        .route("/stats", get(stats))
        .route("/healthz", get(healthz))
        .fallback(not_found)
        .layer(cors)
        .with_state(state)
}

/// Serve until `shutdown` resolves, then let in-flight requests finish.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

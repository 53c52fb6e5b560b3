//! HTTP front end for [`AssistSession`]s.
//!
//! Each session lives behind its own mutex, so events for one trail are
//! applied one at a time while different trails proceed independently.
//! Errors are JSON objects `{code, message, expected_phase?}`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use relaytrail_core::formats::ConfigFile;
use relaytrail_core::policy::{Policy, PolicyKind};
use relaytrail_core::session::{AssistSession, SessionError, SessionEvent, SessionSpec};
use relaytrail_core::sim::resolve_policy;
use relaytrail_core::store::ResultStore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::services::ServeDir;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_phase: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into(), expected_phase: None }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session {id:?}"))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::OutOfOrder { .. } => StatusCode::CONFLICT,
            SessionError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            code: e.code().to_string(),
            message: e.to_string(),
            expected_phase: e.expected_phase().map(str::to_string),
        }
    }
}

impl From<relaytrail_core::Error> for ApiError {
    fn from(e: relaytrail_core::Error) -> Self {
        SessionError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Parses a request body, reporting malformed JSON as a validation error
/// instead of axum's plain-text rejection.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(bytes).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

/// Policy given either by kind (`"opt_explore_lim"`, `"OEL"`, ...) and
/// solved on creation, or fully resolved.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PolicyRequest {
    Kind(String),
    Resolved(Policy),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub config: ConfigFile,
    pub policy: PolicyRequest,
    #[serde(default)]
    pub lambda0: Option<f64>,
    #[serde(default)]
    pub sink: Option<usize>,
    /// Seed for solving and calibrating a policy given by kind.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementBody {
    r: usize,
    #[serde(default)]
    peer: Option<usize>,
    outage_by_dbm: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaceBody {
    #[serde(default)]
    confirmed_position: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceBody {
    r: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyBody {}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<AssistSession>>>>,
    store: Option<ResultStore>,
}

impl AppState {
    /// Finished sessions are written to `store` when one is given.
    pub fn new(store: Option<ResultStore>) -> Arc<Self> {
        Arc::new(AppState { sessions: RwLock::default(), store })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<AssistSession>>, ApiError> {
        let map = self.sessions.read().map_err(|_| ApiError::internal("session table poisoned"))?;
        map.get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }
}

fn spec_from_request(req: CreateSession) -> Result<SessionSpec, ApiError> {
    req.config.validate()?;
    let policy = match req.policy {
        PolicyRequest::Resolved(p) => p,
        PolicyRequest::Kind(name) => {
            let kind = PolicyKind::parse(&name)
                .ok_or_else(|| ApiError::validation(format!("unknown policy {name:?}")))?;
            let mut opts = req.config.resolve_options(req.seed);
            if req.lambda0.is_some() {
                opts.lambda0 = req.lambda0;
            }
            resolve_policy(kind, &req.config.channel, &req.config.policy, &opts)?
        }
    };
    Ok(SessionSpec { cfg: req.config.policy, policy, sink: req.sink.unwrap_or(1) })
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    // solving a policy can take a while
    let spec = tokio::task::spawn_blocking(move || spec_from_request(req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = AssistSession::new(id.clone(), spec)?;
    state
        .sessions
        .write()
        .map_err(|_| ApiError::internal("session table poisoned"))?
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(Created { id })))
}

#[derive(Serialize)]
struct StoredSession<'a> {
    spec: &'a SessionSpec,
    events: &'a [SessionEvent],
}

fn apply_event(state: &AppState, id: &str, event: SessionEvent) -> ApiResult<Value> {
    let handle = state.session(id)?;
    let mut session = handle.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
    let was_finished = session.phase().name() == "finished";
    let response = session.apply(event)?;
    if !was_finished && session.phase().name() == "finished" {
        if let Some(store) = &state.store {
            let key = StoredSession { spec: session.spec(), events: session.events() };
            store.put("session", &key, None, &session.network())?;
        }
    }
    Ok(Json(serde_json::to_value(response).map_err(|e| ApiError::internal(e.to_string()))?))
}

async fn submit_measurement(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Value> {
    let b: MeasurementBody = parse_body(&body)?;
    apply_event(&state, &id, SessionEvent::SubmitMeasurement { r: b.r, peer: b.peer, outage_by_dbm: b.outage_by_dbm })
}

async fn request_decision(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Value> {
    let _: EmptyBody = parse_body(&body)?;
    apply_event(&state, &id, SessionEvent::RequestDecision)
}

async fn confirm_placement(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Value> {
    let b: PlaceBody = parse_body(&body)?;
    apply_event(&state, &id, SessionEvent::ConfirmPlacement { confirmed_position: b.confirmed_position })
}

async fn source_reached(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Value> {
    let b: SourceBody = parse_body(&body)?;
    apply_event(&state, &id, SessionEvent::SourceReached { r: b.r })
}

fn read_session<T: Serialize>(state: &AppState, id: &str, f: impl FnOnce(&AssistSession) -> T) -> ApiResult<Value> {
    let handle = state.session(id)?;
    let session = handle.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
    Ok(Json(serde_json::to_value(f(&session)).map_err(|e| ApiError::internal(e.to_string()))?))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Value> {
    read_session(&state, &id, AssistSession::view)
}

async fn get_network(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Value> {
    read_session(&state, &id, AssistSession::network)
}

async fn get_events(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Value> {
    read_session(&state, &id, |s| s.events().to_vec())
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

/// The session API, optionally serving a static UI bundle from `ui_dir`.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/measurements", post(submit_measurement))
        .route("/sessions/{id}/decision", post(request_decision))
        .route("/sessions/{id}/place", post(confirm_placement))
        .route("/sessions/{id}/source", post(source_reached))
        .route("/sessions/{id}/network", get(get_network))
        .route("/sessions/{id}/events", get(get_events))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(fallback),
    }
}

/// Serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, state: Arc<AppState>, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state, ui_dir)).await
}

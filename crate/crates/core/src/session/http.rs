//! JSON control surface for interactive sessions.
//!
//! | method | path                       | body                      |
//! |--------|----------------------------|---------------------------|
//! | POST   | `/sessions`                | [`CreateSession`]         |
//! | GET    | `/sessions/{id}/state`     |                           |
//! | POST   | `/sessions/{id}/step`      | `{"choice": Choice}`      |
//! | POST   | `/sessions/{id}/preview`   | `{"action": Action}`      |
//! | GET    | `/sessions/{id}/history`   |                           |
//! | POST   | `/sessions/{id}/terminate` |                           |
//! | GET    | `/sessions/{id}/log`       | session log as JSON lines |
//!
//! Steps and termination take a session's write lock, so mutations of one
//! session are serialized; state, history and previews share a read lock.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{Choice, IterationRecord, Preview, Proposal, Scenario, Session, SessionError};
use crate::geom::Roi;
use crate::learner::MlpModel;
use crate::strategies::{Action, PushStrategy, StopReason, TerminationPolicy};
use crate::vision::{Contour, GrayImage};

type Shared = Arc<RwLock<Session>>;

#[derive(Default)]
struct Registry {
    sessions: RwLock<HashMap<u64, Shared>>,
    next_id: AtomicU64,
    model: Option<Arc<MlpModel>>,
}

#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Registry>,
}

impl AppState {
    /// `model` serves the learned push strategy for every session.
    pub fn new(model: Option<Arc<MlpModel>>) -> Self {
        Self { inner: Arc::new(Registry { model, ..Registry::default() }) }
    }

    fn get(&self, id: u64) -> Result<Shared, ApiError> {
        self.inner
            .sessions
            .read()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or(ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))
    }
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::Terminated(_) => StatusCode::CONFLICT,
            SessionError::InvalidAction(_) | SessionError::Scenario(_) | SessionError::Version(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

/// A built-in scenario name or an inline scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Name(String),
    Inline(Box<Scenario>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub scenario: ScenarioRef,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Push strategy used by auto steps.
    #[serde(default)]
    pub strategy: Option<PushStrategy>,
    #[serde(default)]
    pub termination: Option<TerminationPolicy>,
}

impl CreateSession {
    /// The session this request describes; the CLI builds its sessions the
    /// same way.
    pub fn build(&self, model: Option<Arc<MlpModel>>) -> Result<Session, SessionError> {
        let mut sc = match &self.scenario {
            ScenarioRef::Name(n) => super::builtin(n).ok_or_else(|| SessionError::Scenario(format!("no built-in scenario {n:?}")))?,
            ScenarioRef::Inline(s) => (**s).clone(),
        };
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(t) = self.termination {
            sc.termination = t;
        }
        Ok(Session::new(sc, model)?.with_auto_strategy(self.strategy.unwrap_or(PushStrategy::Maximum)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
    pub k: usize,
    pub e: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Contours {
    pub roi: Roi,
    pub current: Contour,
    pub near: Contour,
    pub desired: Contour,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateView {
    pub id: u64,
    pub k: usize,
    pub e: f64,
    pub terminated: bool,
    pub reason: Option<StopReason>,
    pub current: GrayImage,
    pub desired: GrayImage,
    pub contours: Option<Contours>,
    pub proposals: Vec<Proposal>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRequest {
    pub choice: Choice,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub action: Action,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub k: usize,
    #[serde(flatten)]
    pub preview: Preview,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct History {
    pub k: usize,
    pub errors: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub reason: Option<StopReason>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Terminated {
    pub reason: StopReason,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn create(State(app): State<AppState>, Json(req): Json<CreateSession>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let model = app.inner.model.clone();
    let session = blocking(move || Ok(req.build(model)?)).await?;
    let id = app.inner.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let body = Created { id, k: session.k(), e: session.current_error() };
    app.inner.sessions.write().unwrap().insert(id, Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

fn contours_of(s: &Session) -> Option<Contours> {
    let t = s.next_local_target()?;
    Some(Contours { roi: t.roi, current: t.current, near: t.near, desired: t.desired })
}

async fn state(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Json<StateView>, ApiError> {
    let shared = app.get(id)?;
    blocking(move || {
        let s = shared.read().unwrap();
        Ok(Json(StateView {
            id,
            k: s.k(),
            e: s.current_error(),
            terminated: s.is_terminated(),
            reason: s.stop_reason(),
            current: s.current_image(),
            desired: s.desired_image().clone(),
            contours: contours_of(&s),
            proposals: s.proposals(),
        }))
    })
    .await
}

async fn step(
    State(app): State<AppState>,
    Path(id): Path<u64>,
    Json(req): Json<StepRequest>,
) -> Result<Json<IterationRecord>, ApiError> {
    let shared = app.get(id)?;
    blocking(move || Ok(Json(shared.write().unwrap().run_iteration(&req.choice)?))).await
}

async fn preview(
    State(app): State<AppState>,
    Path(id): Path<u64>,
    Json(req): Json<PreviewRequest>,
) -> Result<Json<PreviewResponse>, ApiError> {
    let shared = app.get(id)?;
    blocking(move || {
        let s = shared.read().unwrap();
        Ok(Json(PreviewResponse { k: s.k(), preview: s.preview(&req.action)? }))
    })
    .await
}

async fn history(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Json<History>, ApiError> {
    let shared = app.get(id)?;
    let s = shared.read().unwrap();
    Ok(Json(History {
        k: s.k(),
        errors: s.errors().to_vec(),
        records: s.records().to_vec(),
        reason: s.stop_reason(),
    }))
}

async fn terminate(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Json<Terminated>, ApiError> {
    let shared = app.get(id)?;
    let reason = shared.write().unwrap().terminate()?;
    Ok(Json(Terminated { reason }))
}

async fn log(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let shared = app.get(id)?;
    let text = shared.read().unwrap().log().to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/terminate", post(terminate))
        .route("/sessions/{id}/log", get(log))
        .with_state(app)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, model: Option<Arc<MlpModel>>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(model))).await
}

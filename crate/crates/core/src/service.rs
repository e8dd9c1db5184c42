//! HTTP/JSON service for interactive localization sessions.
//!
//! A human judge drives the search from a browser: the service hands out the
//! state at the pending cut, accepts a per-edge plus global verdict, and
//! advances the session until it finishes.
//!
//! | method | path                     | body / reply                              |
//! |--------|--------------------------|-------------------------------------------|
//! | POST   | `/sessions`              | `{graph, anomaly, predicates?}` → status  |
//! | GET    | `/sessions/{id}/query`   | pending cut, its atoms, progress          |
//! | POST   | `/sessions/{id}/answer`  | `{per_edge, global}` → status, next       |
//! | GET    | `/sessions/{id}/result`  | result and transcript (409 while running) |
//! | GET    | `/sessions/{id}/graph`   | vertices with levels, edges, bounds       |
//!
//! Static web UI assets are served at `/` when a directory is configured.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use axum::extract::{Path as UrlPath, State as AxumState};
use axum::http::{header, StatusCode, Uri};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cut::{Atom, DownsetRecord};
use crate::graph::{topo_levels, EdgeKey, EdgeKind, EdgeLabel, ExecutionGraph, Scalar};
use crate::graph_file::parse_graph;
use crate::localizer::{
    write_transcript, InitialAnomaly, LocalizationResult, LocalizeError, LocalizerConfig,
    LocalizerSession, TranscriptStep,
};
use crate::oracle::{EdgeVerdict, GlobalVerdict, StateVerdict};
use crate::predicate::parse_predicates;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("no session with id `{0}`")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

/// The graph in a create request: either the graph file text or its lines
/// as JSON objects.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GraphPayload {
    Text(String),
    Lines(Vec<serde_json::Value>),
}

impl GraphPayload {
    fn to_text(&self) -> String {
        match self {
            GraphPayload::Text(t) => t.clone(),
            GraphPayload::Lines(lines) => lines
                .iter()
                .map(|l| format!("{l}\n"))
                .collect::<String>(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateRequest {
    pub graph: GraphPayload,
    /// `edge:<src,dst,kind[,var]>` or `global:<ids>:<predicate ids>`.
    pub anomaly: String,
    /// Predicate file text, used to minimise a global anomaly.
    #[serde(default)]
    pub predicates: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingVerdict,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending: Option<DownsetRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<LocalizationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub between_count: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPayload {
    pub cut: DownsetRecord,
    pub atoms: Vec<Atom>,
    pub progress: Progress,
}

/// A human's global answer: `"ok"`, `"violated"`, or a full verdict such as
/// `{"violated":["p0"]}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GlobalAnswer {
    Word(String),
    Verdict(GlobalVerdict),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AnswerBody {
    pub per_edge: BTreeMap<EdgeKey, EdgeVerdict>,
    pub global: GlobalAnswer,
}

impl AnswerBody {
    pub fn into_verdict(self) -> Result<StateVerdict, ServiceError> {
        let global = match self.global {
            GlobalAnswer::Word(w) if w == "ok" => GlobalVerdict::Ok,
            GlobalAnswer::Word(w) if w == "violated" => GlobalVerdict::Violated(Vec::new()),
            GlobalAnswer::Word(w) => {
                return Err(ServiceError::Unprocessable(format!(
                    "global must be \"ok\" or \"violated\", got {w:?}"
                )))
            }
            GlobalAnswer::Verdict(v) => v,
        };
        Ok(StateVerdict {
            per_edge: self.per_edge,
            global,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub status: Status,
    pub next: Option<QueryPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<LocalizationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPayload {
    pub result: LocalizationResult,
    pub transcript: Vec<TranscriptStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexView {
    pub id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub desc: Option<String>,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeView {
    pub key: EdgeKey,
    pub src: u64,
    pub dst: u64,
    pub kind: EdgeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    pub deterministic: bool,
    pub vertices: Vec<VertexView>,
    pub edges: Vec<EdgeView>,
    pub lower: DownsetRecord,
    pub upper: DownsetRecord,
    pub pending: Option<DownsetRecord>,
}

/// The pending examination of a session, or `None` once it is finished.
pub fn query_payload(session: &LocalizerSession) -> Option<QueryPayload> {
    let cut = session.pending()?;
    let state = session.pending_state()?;
    Some(QueryPayload {
        cut: cut.record(),
        atoms: state.atoms().to_vec(),
        progress: Progress {
            between_count: session.between_count(),
            step: session.transcript().len() + 1,
        },
    })
}

pub struct SessionRecord {
    pub id: String,
    pub session: LocalizerSession,
    pub created: SystemTime,
    pub updated: SystemTime,
    transcript_path: Option<PathBuf>,
}

impl SessionRecord {
    fn status(&self) -> Status {
        if self.session.is_finished() {
            Status::Finished
        } else {
            Status::AwaitingVerdict
        }
    }

    fn query(&self) -> Option<QueryPayload> {
        query_payload(&self.session)
    }

    fn persist(&self) -> Result<(), ServiceError> {
        let (Some(path), Some(result)) = (&self.transcript_path, self.session.result()) else {
            return Ok(());
        };
        let mut buf = Vec::new();
        write_transcript(&mut buf, self.session.transcript(), result)
            .and_then(|_| fs::write(path, buf))
            .map_err(|e| ServiceError::Internal(format!("writing transcript: {e}")))
    }
}

/// In-memory session table. Each session is advanced under its own lock.
#[derive(Default)]
pub struct SessionService {
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionRecord>>>>,
    transcript_dir: Option<PathBuf>,
}

impl SessionService {
    pub fn new() -> Self {
        Self::default()
    }

    /// Finished sessions write `<dir>/<id>.jsonl`.
    pub fn with_transcript_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.transcript_dir = Some(dir.into());
        self
    }

    pub fn create(&self, req: CreateRequest) -> Result<CreateResponse, ServiceError> {
        let graph = parse_graph(&req.graph.to_text())
            .map_err(|e| ServiceError::BadRequest(format!("graph: {e}")))?;
        let anomaly: InitialAnomaly = req
            .anomaly
            .parse()
            .map_err(|e| ServiceError::BadRequest(format!("{e}")))?;
        let predicates = match &req.predicates {
            Some(text) => parse_predicates(text).map_err(|(line, e)| {
                ServiceError::BadRequest(format!("predicates line {line}: {e}"))
            })?,
            None => Vec::new(),
        };
        self.create_session(Arc::new(graph), anomaly, LocalizerConfig { predicates }, None)
    }

    /// Creates a session from already-parsed inputs. `transcript_path`
    /// overrides the configured transcript directory for this session.
    pub fn create_session(
        &self,
        graph: Arc<ExecutionGraph>,
        anomaly: InitialAnomaly,
        config: LocalizerConfig,
        transcript_path: Option<PathBuf>,
    ) -> Result<CreateResponse, ServiceError> {
        let session = LocalizerSession::start(graph, anomaly, config)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let transcript_path = transcript_path.or_else(|| {
            self.transcript_dir
                .as_ref()
                .map(|d| d.join(format!("{id}.jsonl")))
        });
        let now = SystemTime::now();
        let record = SessionRecord {
            id: id.clone(),
            session,
            created: now,
            updated: now,
            transcript_path,
        };
        record.persist()?;
        let response = CreateResponse {
            id: id.clone(),
            status: record.status(),
            pending: record.session.pending().map(|c| c.record()),
            result: record.session.result().cloned(),
        };
        self.sessions
            .write()
            .expect("session table lock poisoned")
            .insert(id, Arc::new(Mutex::new(record)));
        Ok(response)
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ServiceError> {
        self.sessions
            .read()
            .expect("session table lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    fn with_record<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut SessionRecord) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let entry = self.lookup(id)?;
        let mut record = entry.lock().expect("session lock poisoned");
        f(&mut record)
    }

    pub fn query(&self, id: &str) -> Result<QueryPayload, ServiceError> {
        self.with_record(id, |r| {
            r.query()
                .ok_or_else(|| ServiceError::Conflict("session is finished".into()))
        })
    }

    pub fn answer(&self, id: &str, body: AnswerBody) -> Result<AnswerResponse, ServiceError> {
        self.with_record(id, |r| {
            if r.session.is_finished() {
                return Err(ServiceError::Conflict("session is finished".into()));
            }
            let verdict = body.into_verdict()?;
            r.session.feed_verdict(verdict).map_err(|e| match e {
                LocalizeError::NotAwaiting => ServiceError::Conflict(e.to_string()),
                LocalizeError::VerdictMismatch(_) | LocalizeError::AnomalyNotConfirmed => {
                    ServiceError::Unprocessable(e.to_string())
                }
                other => ServiceError::Internal(other.to_string()),
            })?;
            r.updated = SystemTime::now();
            r.persist()?;
            Ok(AnswerResponse {
                status: r.status(),
                next: r.query(),
                result: r.session.result().cloned(),
            })
        })
    }

    pub fn result(&self, id: &str) -> Result<ResultPayload, ServiceError> {
        self.with_record(id, |r| match r.session.result() {
            Some(result) => Ok(ResultPayload {
                result: result.clone(),
                transcript: r.session.transcript().to_vec(),
            }),
            None => Err(ServiceError::Conflict("session is still running".into())),
        })
    }

    pub fn graph(&self, id: &str) -> Result<GraphView, ServiceError> {
        self.with_record(id, |r| {
            let g = r.session.graph();
            let levels = topo_levels(g).map_err(|e| ServiceError::Internal(e.to_string()))?;
            let vertices = g
                .vertices()
                .map(|v| VertexView {
                    id: v.0,
                    desc: g.description(v).map(str::to_string),
                    level: levels[&v],
                })
                .collect();
            let edges = g
                .edges()
                .iter()
                .map(|e| {
                    let (var, value) = match &e.label {
                        EdgeLabel::Data { var, value } => {
                            (Some(var.clone()), Some(value.clone()))
                        }
                        EdgeLabel::Control => (None, None),
                    };
                    EdgeView {
                        key: e.key(),
                        src: e.src.0,
                        dst: e.dst.0,
                        kind: e.kind(),
                        var,
                        value,
                    }
                })
                .collect();
            Ok(GraphView {
                deterministic: g.is_deterministic(),
                vertices,
                edges,
                lower: r.session.lower().record(),
                upper: r.session.upper().record(),
                pending: r.session.pending().map(|c| c.record()),
            })
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session table lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone)]
struct AppState {
    service: Arc<SessionService>,
    static_dir: Option<Arc<PathBuf>>,
}

pub fn router(service: Arc<SessionService>, static_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        service,
        static_dir: static_dir.map(Arc::new),
    };
    Router::new()
        .route("/sessions", post(create_handler))
        .route("/sessions/{id}/query", get(query_handler))
        .route("/sessions/{id}/answer", post(answer_handler))
        .route("/sessions/{id}/result", get(result_handler))
        .route("/sessions/{id}/graph", get(graph_handler))
        .fallback(get(static_handler))
        .with_state(state)
}

async fn create_handler(
    AxumState(app): AxumState<AppState>,
    Json(req): Json<CreateRequest>,
) -> Result<(StatusCode, Json<CreateResponse>), ServiceError> {
    app.service
        .create(req)
        .map(|r| (StatusCode::CREATED, Json(r)))
}

async fn query_handler(
    AxumState(app): AxumState<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<QueryPayload>, ServiceError> {
    app.service.query(&id).map(Json)
}

async fn answer_handler(
    AxumState(app): AxumState<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<AnswerBody>,
) -> Result<Json<AnswerResponse>, ServiceError> {
    app.service.answer(&id, body).map(Json)
}

async fn result_handler(
    AxumState(app): AxumState<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<ResultPayload>, ServiceError> {
    app.service.result(&id).map(Json)
}

async fn graph_handler(
    AxumState(app): AxumState<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<GraphView>, ServiceError> {
    app.service.graph(&id).map(Json)
}

const PLACEHOLDER_INDEX: &str = "<!doctype html>\n<title>cutloc</title>\n\
<p>cutloc session service. No web UI assets are configured; start with \
<code>--static-dir</code> or use the JSON endpoints under <code>/sessions</code>.</p>\n";

async fn static_handler(AxumState(app): AxumState<AppState>, uri: Uri) -> Response {
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let Some(dir) = &app.static_dir else {
        return if rel == "index.html" {
            Html(PLACEHOLDER_INDEX).into_response()
        } else {
            StatusCode::NOT_FOUND.into_response()
        };
    };
    let rel_path = Path::new(rel);
    if rel_path
        .components()
        .any(|c| !matches!(c, Component::Normal(_)))
    {
        return StatusCode::NOT_FOUND.into_response();
    }
    match fs::read(dir.join(rel_path)) {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(rel))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

fn content_type(path: &str) -> &'static str {
    match path.rsplit('.').next() {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

/// Serves until the process is stopped. `on_bound` receives the actual
/// listening address (useful with port 0).
pub async fn serve(
    addr: SocketAddr,
    service: Arc<SessionService>,
    static_dir: Option<PathBuf>,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router(service, static_dir)).await
}

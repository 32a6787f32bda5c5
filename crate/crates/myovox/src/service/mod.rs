//! HTTP authoring service. Each session's edits run one at a time in
//! arrival order; solves run on the blocking pool so the server stays
//! responsive.

mod session;

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use futures::stream::{Stream, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast;

pub use session::{
    CreateRequest, CurveRequest, JournalOp, MeshSummary, Session, SessionError, SessionResult, StrokeRequest,
};

struct Handle {
    /// Tokio's mutex is fair, which gives FIFO edits per session.
    session: Arc<tokio::sync::Mutex<Session>>,
    events: broadcast::Sender<String>,
}

/// Shared server state.
pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Handle>>>,
    /// Session journals and finalize outputs live here.
    dir: PathBuf,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(dir: &Path) -> Arc<Self> {
        Arc::new(AppState { sessions: Mutex::new(HashMap::new()), dir: dir.to_path_buf(), next_id: AtomicU64::new(1) })
    }

    /// Rebuild every journaled session found in the state directory.
    pub fn restore(dir: &Path) -> std::io::Result<Arc<Self>> {
        let state = AppState::new(dir);
        let Ok(entries) = std::fs::read_dir(dir) else { return Ok(state) };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut max_id = 0;
        for p in paths {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            match Session::replay(&id, &p) {
                Ok(s) => {
                    if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                        max_id = max_id.max(n);
                    }
                    log::info!("restored session {id} at revision {}", s.revision());
                    state.insert(s);
                }
                Err(e) => log::warn!("skipping journal {}: {e}", p.display()),
            }
        }
        state.next_id.store(max_id + 1, Ordering::SeqCst);
        Ok(state)
    }

    fn insert(&self, s: Session) {
        let (events, _) = broadcast::channel(64);
        let id = s.id.clone();
        let h = Handle { session: Arc::new(tokio::sync::Mutex::new(s)), events };
        self.sessions.lock().unwrap().insert(id, Arc::new(h));
    }

    fn get(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(SessionError::NotFound(format!("no session {id}"))))
    }

    pub fn journal_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn finalize_dir(&self, id: &str) -> PathBuf {
        self.dir.join(id).join("final")
    }
}

struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let msg = self.0.to_string();
        let (status, body) = match self.0 {
            SessionError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": msg })),
            SessionError::Conflict(_) => (StatusCode::CONFLICT, json!({ "error": msg })),
            SessionError::Stale { current } => (StatusCode::GONE, json!({ "error": msg, "revision": current })),
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": msg })),
            SessionError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg })),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> SessionResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError(SessionError::Internal(e.to_string())))?.map_err(ApiError)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create(State(state): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> ApiResult<Response> {
    let n = state.next_id.fetch_add(1, Ordering::SeqCst);
    let id = format!("s{n}");
    let journal = state.journal_path(&id);
    std::fs::create_dir_all(&state.dir).map_err(|e| ApiError(SessionError::Internal(e.to_string())))?;
    let sid = id.clone();
    let s = blocking(move || Session::create(&sid, req, Some(journal))).await?;
    let body = json!({ "id": id, "revision": s.revision(), "tissue_ids": s.fields().tissue_ids(), "mesh": s.summary() });
    state.insert(s);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

/// Run an edit under the session lock and announce the new revision.
async fn edit(
    h: Arc<Handle>,
    f: impl FnOnce(&mut Session) -> SessionResult<u64> + Send + 'static,
) -> ApiResult<Json<serde_json::Value>> {
    let guard = h.session.clone().lock_owned().await;
    let (rev, ids) = blocking(move || {
        let mut guard = guard;
        let rev = f(&mut guard)?;
        Ok((rev, guard.fields().tissue_ids().to_vec()))
    })
    .await?;
    let body = json!({ "revision": rev, "tissue_ids": ids });
    let _ = h.events.send(json!({ "type": "revision", "revision": rev, "tissue_ids": ids }).to_string());
    Ok(Json(body))
}

async fn upsert_curve(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<CurveRequest>,
) -> ApiResult<Json<serde_json::Value>> {
    let h = state.get(&id)?;
    edit(h, move |s| s.apply(&req)).await
}

async fn delete_curve(
    State(state): State<Arc<AppState>>,
    UrlPath((id, cid)): UrlPath<(String, u32)>,
) -> ApiResult<Json<serde_json::Value>> {
    let h = state.get(&id)?;
    edit(h, move |s| s.delete_curve(cid)).await
}

#[derive(Deserialize)]
struct RevQuery {
    rev: Option<u64>,
}

async fn fields(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RevQuery>,
) -> ApiResult<Response> {
    let h = state.get(&id)?;
    let s = h.session.lock().await;
    let buf = s.field_buffer(q.rev)?;
    let rev = s.revision().to_string();
    Ok(([(header::CONTENT_TYPE, "application/octet-stream".to_string()), (header::ETAG, rev)], buf).into_response())
}

async fn events(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let h = state.get(&id)?;
    let rx = h.events.subscribe();
    let rev = h.session.lock().await.revision();
    let hello = json!({ "type": "revision", "revision": rev }).to_string();
    let stream = futures::stream::once(async move { hello }).chain(futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(msg) => return Some((msg, rx)),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    }));
    Ok(Sse::new(stream.map(|m| Ok(Event::default().data(m)))).keep_alive(KeepAlive::default()))
}

async fn finalize(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<serde_json::Value>> {
    let h = state.get(&id)?;
    let dir = state.finalize_dir(&id);
    let guard = h.session.clone().lock_owned().await;
    let (rev, manifest) = blocking(move || {
        let mut guard = guard;
        let m = guard.finalize(&dir)?;
        Ok((guard.revision(), m))
    })
    .await?;
    let _ = h.events.send(json!({ "type": "finalized", "revision": rev }).to_string());
    Ok(Json(json!({ "revision": rev, "manifest": manifest })))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create))
        .route("/sessions/{id}/curves", post(upsert_curve))
        .route("/sessions/{id}/curves/{cid}", delete(delete_curve))
        .route("/sessions/{id}/fields", get(fields))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/finalize", post(finalize))
        .with_state(state)
}

/// Serve until Ctrl-C.
pub async fn serve(addr: &str, dir: &Path) -> std::io::Result<()> {
    let state = AppState::restore(dir)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

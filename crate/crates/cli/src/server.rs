//! Loopback JSON service over [`Session`]. Sessions live in memory; each is serialised behind
//! its own lock and driven on the blocking pool, since moves may run long oracle searches.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;

use forcegame::session::{AnalyzeRequest, MoveRequest, Session, SessionConfig, SessionError};

use crate::commands::to_json;

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next: AtomicU64,
    /// Write-through directory for transcript files.
    transcripts: Option<PathBuf>,
}

impl AppState {
    pub fn new(transcripts: Option<PathBuf>) -> AppState {
        AppState { transcripts, ..AppState::default() }
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session `{id}`")))
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        if let Some(dir) = &self.transcripts {
            let path = dir.join(format!("{}.json", s.id));
            std::fs::write(&path, to_json(&s.transcript_file()))
                .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

pub struct ApiError(StatusCode, String);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        let status = match e {
            SessionError::NotYourTurn(_) | SessionError::Over => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> ApiError {
        ApiError(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        document(self.0, &json!({ "error": self.1 }))
    }
}

/// Pretty JSON, byte-identical with what the CLI prints.
fn document(status: StatusCode, v: &impl Serialize) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], to_json(v)).into_response()
}

type Shared = Arc<AppState>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn create(State(st): State<Shared>, body: Result<Json<SessionConfig>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(config) = body?;
    blocking(move || {
        let id = format!("s{}", st.next.fetch_add(1, Ordering::SeqCst) + 1);
        let s = Session::create(id.clone(), config)?;
        st.persist(&s)?;
        let view = s.view();
        st.sessions.lock().expect("session map").insert(id, Arc::new(Mutex::new(s)));
        Ok(document(StatusCode::CREATED, &view))
    })
    .await
}

async fn view(State(st): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = st.get(&id)?;
    blocking(move || Ok(document(StatusCode::OK, &s.lock().expect("session").view()))).await
}

async fn transcript(State(st): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = st.get(&id)?;
    blocking(move || Ok(document(StatusCode::OK, &s.lock().expect("session").transcript_file()))).await
}

async fn moves(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<MoveRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let s = st.get(&id)?;
    let Json(req) = body?;
    blocking(move || {
        let mut s = s.lock().expect("session");
        let r = s.play(&req)?;
        if r.accepted {
            st.persist(&s)?;
        }
        let status = if r.accepted { StatusCode::OK } else { StatusCode::UNPROCESSABLE_ENTITY };
        Ok(document(status, &r))
    })
    .await
}

async fn analyze(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let s = st.get(&id)?;
    let Json(req) = body?;
    blocking(move || Ok(document(StatusCode::OK, &s.lock().expect("session").analyze(&req)?))).await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(view))
        .route("/sessions/{id}/moves", post(moves))
        .route("/sessions/{id}/analyze", post(analyze))
        .route("/sessions/{id}/transcript", get(transcript))
        .with_state(Arc::new(state))
}

pub async fn serve(addr: std::net::SocketAddr, transcripts: Option<PathBuf>) -> std::io::Result<()> {
    if let Some(dir) = &transcripts {
        std::fs::create_dir_all(dir)?;
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(transcripts))).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use forcegame::game::Side;

    #[test]
    fn turn_and_over_conflict() {
        assert_eq!(ApiError::from(SessionError::Over).0, StatusCode::CONFLICT);
        assert_eq!(ApiError::from(SessionError::NotYourTurn(Side::Exists)).0, StatusCode::CONFLICT);
        assert_eq!(ApiError::from(SessionError::MoveShape).0, StatusCode::BAD_REQUEST);
    }
}

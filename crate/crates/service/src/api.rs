//! HTTP JSON API. Errors are `{"code": ..., "message": ...}` with a status
//! matching the error kind.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use seamtrack_core::geometry::GeometryConfig;
use seamtrack_core::io::Sequence;

use crate::error::ServiceError;
use crate::manager::{patch_config, SessionManager};
use crate::session::{ConstraintOp, EditAction, Op, SessionInit};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

type ApiResult = Result<Response, ServiceError>;

/// Runs solver or disk work off the async workers.
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
}

/// Parses a JSON body; an empty body reads as `{}`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ServiceError> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ServiceError::Invalid(format!("request body: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    nuclei_csv: Option<String>,
    seams_csv: Option<String>,
    nuclei_path: Option<PathBuf>,
    seams_path: Option<PathBuf>,
    /// Fields overriding the server's default tracking config.
    config: Option<serde_json::Value>,
    geometry: Option<GeometryConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EditRequest {
    expected_revision: Option<u64>,
    edit: EditAction,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintRequest {
    expected_revision: Option<u64>,
    constraint: ConstraintOp,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigRequest {
    expected_revision: Option<u64>,
    config: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    config: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommitRequest {
    expected_revision: Option<u64>,
    #[serde(default)]
    force: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RevisionRequest {
    expected_revision: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct StateQuery {
    since: Option<u64>,
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(serde_json::json!({"status": "ok"})) }))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/frames/{frame}/detections:edit", post(edit_detections))
        .route("/sessions/{id}/predict", post(predict))
        .route("/sessions/{id}/constraints", post(constrain))
        .route("/sessions/{id}/config", post(configure))
        .route("/sessions/{id}/commit", post(commit))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/redo", post(redo))
        .route("/sessions/{id}/export", get(export))
        .with_state(manager)
}

async fn list_sessions(State(m): State<Arc<SessionManager>>) -> Json<Vec<String>> {
    Json(m.session_ids())
}

fn load_sequence(req: &CreateRequest) -> Result<Sequence, ServiceError> {
    let seq = match (&req.nuclei_csv, &req.nuclei_path) {
        (Some(text), None) => Sequence::parse(text, "nuclei_csv", req.seams_csv.as_deref().map(|s| (s, "seams_csv")))?,
        (None, Some(path)) => {
            if req.seams_csv.is_some() {
                return Err(ServiceError::Invalid("give seams as seams_path alongside nuclei_path".into()));
            }
            Sequence::load(path, req.seams_path.as_deref())?
        }
        _ => return Err(ServiceError::Invalid("give exactly one of nuclei_csv and nuclei_path".into())),
    };
    if req.nuclei_csv.is_some() && req.seams_path.is_some() {
        return Err(ServiceError::Invalid("give seams as seams_csv alongside nuclei_csv".into()));
    }
    Ok(seq)
}

async fn create_session(State(m): State<Arc<SessionManager>>, bytes: Bytes) -> ApiResult {
    let req: CreateRequest = body(&bytes)?;
    let sequence = load_sequence(&req)?;
    let defaults = m.defaults();
    let config = match &req.config {
        Some(patch) => patch_config(&defaults.config, patch)?,
        None => defaults.config.clone(),
    };
    let init = SessionInit {
        sequence,
        config,
        geometry: req.geometry.unwrap_or(defaults.geometry),
    };
    let view = blocking(move || m.create(init)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_state(
    State(m): State<Arc<SessionManager>>,
    Path(id): Path<String>,
    Query(q): Query<StateQuery>,
) -> ApiResult {
    Ok(match q.since {
        Some(since) => Json(m.delta(&id, since)?).into_response(),
        None => Json(m.state(&id)?.as_ref().clone()).into_response(),
    })
}

async fn edit_detections(
    State(m): State<Arc<SessionManager>>,
    Path((id, frame)): Path<(String, usize)>,
    bytes: Bytes,
) -> ApiResult {
    let req: EditRequest = body(&bytes)?;
    let op = Op::Edit { frame, edit: req.edit };
    let view = blocking(move || m.apply(&id, op, req.expected_revision)).await?;
    Ok(Json(view.as_ref().clone()).into_response())
}

async fn predict(State(m): State<Arc<SessionManager>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: PredictRequest = body(&bytes)?;
    let prediction = blocking(move || m.predict(&id, req.config.as_ref())).await?;
    Ok(Json(prediction).into_response())
}

async fn constrain(State(m): State<Arc<SessionManager>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: ConstraintRequest = body(&bytes)?;
    let op = Op::Constrain {
        constraint: req.constraint,
    };
    let view = blocking(move || m.apply(&id, op, req.expected_revision)).await?;
    Ok(Json(view.as_ref().clone()).into_response())
}

async fn configure(State(m): State<Arc<SessionManager>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: ConfigRequest = body(&bytes)?;
    let config = patch_config(&m.state(&id)?.config, &req.config)?;
    let view = blocking(move || m.apply(&id, Op::Configure { config }, req.expected_revision)).await?;
    Ok(Json(view.as_ref().clone()).into_response())
}

async fn commit(State(m): State<Arc<SessionManager>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: CommitRequest = body(&bytes)?;
    let op = Op::Commit { force: req.force };
    let view = blocking(move || m.apply(&id, op, req.expected_revision)).await?;
    Ok(Json(view.as_ref().clone()).into_response())
}

async fn undo(State(m): State<Arc<SessionManager>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: RevisionRequest = body(&bytes)?;
    let view = blocking(move || m.apply(&id, Op::Undo, req.expected_revision)).await?;
    Ok(Json(view.as_ref().clone()).into_response())
}

async fn redo(State(m): State<Arc<SessionManager>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: RevisionRequest = body(&bytes)?;
    let view = blocking(move || m.apply(&id, Op::Redo, req.expected_revision)).await?;
    Ok(Json(view.as_ref().clone()).into_response())
}

async fn export(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> ApiResult {
    let csv = m.export_csv(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

/// Serves the API until the process receives Ctrl-C.
pub async fn serve(addr: SocketAddr, manager: Arc<SessionManager>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(manager))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

//! HTTP API over [`ReviewService`], used by the review UI.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bru_core::engine::RunStatus;
use bru_core::prompt::Condition;
use bru_core::review::{ReviewError, ReviewService};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::{ServeDir, ServeFile};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<ReviewService>,
    /// Run the UI opens by default.
    pub run_id: String,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub dataset: String,
    pub condition: Condition,
    pub model: String,
    pub status: RunStatus,
    pub n_items: usize,
}

#[derive(Debug, Deserialize)]
pub struct AnnotationBody {
    pub reasoning_correct: bool,
    #[serde(default = "default_reviewer")]
    pub reviewer: String,
    #[serde(default)]
    pub note: Option<String>,
}

fn default_reviewer() -> String {
    "reviewer".into()
}

pub struct ApiError(ReviewError);

impl From<ReviewError> for ApiError {
    fn from(err: ReviewError) -> Self {
        ApiError(err)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            ReviewError::RunNotFound(_) | ReviewError::UnknownItem(_) => StatusCode::NOT_FOUND,
            ReviewError::AbstainedItem(_) | ReviewError::UndecidedItem(_) => StatusCode::CONFLICT,
            ReviewError::Malformed { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Run blocking service calls off the async workers.
async fn blocking<T, F>(state: AppState, f: F) -> ApiResult<T>
where
    F: FnOnce(&ReviewService) -> Result<T, ReviewError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state.service))
        .await
        .expect("review task panicked")
        .map(Json)
        .map_err(ApiError)
}

async fn session(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "run_id": state.run_id }))
}

async fn runs(State(state): State<AppState>) -> ApiResult<Vec<RunSummary>> {
    blocking(state, |svc| {
        let mut out = Vec::new();
        for id in svc.list_runs()? {
            let meta = svc.runs().load_meta(&id)?;
            out.push(RunSummary {
                run_id: meta.run_id,
                dataset: meta.dataset.name,
                condition: meta.condition,
                model: meta.model.model_name,
                status: meta.status,
                n_items: meta.dataset.item_ids.len(),
            });
        }
        Ok(out)
    })
    .await
}

async fn queue(State(state): State<AppState>, Path(run_id): Path<String>) -> impl IntoResponse {
    blocking(state, move |svc| svc.queue(&run_id)).await
}

async fn item(State(state): State<AppState>, Path((run_id, item_id)): Path<(String, String)>) -> impl IntoResponse {
    blocking(state, move |svc| svc.item(&run_id, &item_id)).await
}

async fn annotate(
    State(state): State<AppState>,
    Path((run_id, item_id)): Path<(String, String)>,
    Json(body): Json<AnnotationBody>,
) -> impl IntoResponse {
    blocking(state, move |svc| {
        svc.submit_annotation(&run_id, &item_id, body.reasoning_correct, &body.reviewer, body.note)
    })
    .await
}

async fn scores(State(state): State<AppState>, Path(run_id): Path<String>) -> impl IntoResponse {
    blocking(state, move |svc| svc.scores(&run_id)).await
}

/// API routes, plus the UI bundle at `/` when `ui_dir` is given.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/session", get(session))
        .route("/runs", get(runs))
        .route("/runs/{id}/queue", get(queue))
        .route("/runs/{id}/items/{item}", get(item))
        .route("/runs/{id}/items/{item}/annotation", post(annotate))
        .route("/runs/{id}/scores", get(scores))
        .with_state(state);
    match ui_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api,
    }
}

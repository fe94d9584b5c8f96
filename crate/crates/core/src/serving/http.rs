//! HTTP front end for [`ScoreService`].
//!
//! - `GET /v1/relevance?query=..&item=..` → `{score, source, model_version}`;
//!   400 when a parameter is missing or unusable, 503 when the online path
//!   fails
//! - `GET /v1/stats` → [`ServingStats`](super::ServingStats)
//! - `POST /v1/admin/swap` with `{store_path, index_dir}` → 200, or 409 when
//!   the new artifacts are rejected

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::service::ScoreService;
use super::ServeError;

#[derive(Debug, Serialize, Deserialize)]
pub struct SwapRequest {
    pub store_path: PathBuf,
    pub index_dir: PathBuf,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn relevance(
    State(service): State<Arc<ScoreService>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let (Some(query), Some(item)) = (params.get("query").cloned(), params.get("item").cloned())
    else {
        return error(StatusCode::BAD_REQUEST, "query and item parameters are required");
    };
    // online scoring may block on a remote model
    let result = tokio::task::spawn_blocking(move || service.serve_score(&query, &item)).await;
    match result {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(e @ ServeError::BadKey(_))) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Ok(Err(e)) => error(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn stats(State(service): State<Arc<ScoreService>>) -> Response {
    Json(service.stats()).into_response()
}

async fn swap(
    State(service): State<Arc<ScoreService>>,
    Json(request): Json<SwapRequest>,
) -> Response {
    let result = tokio::task::spawn_blocking(move || {
        service.swap_from_paths(&request.store_path, &request.index_dir)
    })
    .await;
    match result {
        Ok(Ok(version)) => Json(json!({ "version": version })).into_response(),
        Ok(Err(e)) => error(StatusCode::CONFLICT, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(service: Arc<ScoreService>) -> Router {
    Router::new()
        .route("/v1/relevance", get(relevance))
        .route("/v1/stats", get(stats))
        .route("/v1/admin/swap", post(swap))
        .with_state(service)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<ScoreService>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

//! JSON over HTTP. Every failure, unknown routes included, answers with an
//! [`ErrorBody`](crate::error::ErrorBody).

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::app::{DatasetUpload, ModifyRequest, Service, StartRequest};
use crate::error::ServiceError;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::Validation(format!("request body: {e}")))
}

/// Runs blocking work (model training, backend calls) off the async runtime.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(format!("worker: {e}")))?
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/datasets", get(list_datasets).post(add_dataset))
        .route("/campaigns", get(list_campaigns).post(start_campaign))
        .route("/campaigns/{id}", get(get_campaign))
        .route("/campaigns/{id}/report", get(campaign_report))
        .route("/campaigns/{id}/pause", post(pause_campaign))
        .route("/campaigns/{id}/resume", post(resume_campaign))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/modify", post(modify))
        .route("/sessions/{id}/accept", post(accept))
        .route("/sessions/{id}/pool", get(pool))
        .fallback(|| async { ServiceError::not_found("route", "requested path") })
        .with_state(service)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn list_datasets(State(s): State<Arc<Service>>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.list_datasets()?))
}

async fn add_dataset(State(s): State<Arc<Service>>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let up: DatasetUpload = body(&bytes)?;
    let summary = blocking(move || s.register_dataset(&up)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_campaigns(State(s): State<Arc<Service>>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.list_campaigns()?))
}

async fn start_campaign(State(s): State<Arc<Service>>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let req: StartRequest = body(&bytes)?;
    let handle = blocking(move || s.start_campaign(&req)).await?;
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

async fn get_campaign(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.get_campaign(&id)?))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn campaign_report(
    State(s): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let report = s.campaign_report(&id)?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("tsv") => Ok(([(header::CONTENT_TYPE, "text/tab-separated-values")], report.tsv).into_response()),
        Some(other) => Err(ServiceError::Validation(format!("unknown report format '{other}'"))),
    }
}

async fn pause_campaign(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::ACCEPTED, Json(s.pause_campaign(&id)?)))
}

async fn resume_campaign(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::ACCEPTED, Json(s.resume_campaign(&id)?)))
}

async fn get_session(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.session(&id)?))
}

async fn modify(State(s): State<Arc<Service>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let req: ModifyRequest = body(&bytes)?;
    Ok(Json(blocking(move || s.modify(&id, &req)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
struct AcceptRequest {
    index: usize,
}

async fn accept(State(s): State<Arc<Service>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let req: AcceptRequest = body(&bytes)?;
    Ok(Json(s.accept(&id, req.index)?))
}

async fn pool(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.pool(&id)).await?))
}

/// Serves until the process is interrupted.
pub async fn serve(service: Arc<Service>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

//! HTTP routes, all under `/v1/`.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/v1/arenas` | `{catalog?, segments?, config?, gold_pairs?}` |
//! | GET | `/v1/arenas` | |
//! | GET | `/v1/arenas/{id}/next-pair` | `?worker_id=..&qualification=false` |
//! | POST | `/v1/judgments` | `{ticket_id, choice}` |
//! | GET | `/v1/arenas/{id}/leaderboard` | |
//! | GET | `/v1/arenas/{id}/stats` | |
//! | POST | `/v1/arenas/{id}/advance` | |
//! | POST | `/v1/workers` | `{worker_id, approval_rate}` |
//! | GET | `/v1/workers/{id}` | |
//! | GET | `/v1/config` | |

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use skillarena_core::aggregation::WorkerId;

use crate::error::ApiError;
use crate::service::{CreateArenas, Judgment, RegisterWorker, Service};

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/arenas", post(create_arenas).get(list_arenas))
        .route("/v1/arenas/{id}/next-pair", get(next_pair))
        .route("/v1/arenas/{id}/leaderboard", get(leaderboard))
        .route("/v1/arenas/{id}/stats", get(stats))
        .route("/v1/arenas/{id}/advance", post(advance))
        .route("/v1/judgments", post(judgment))
        .route("/v1/workers", post(register_worker))
        .route("/v1/workers/{id}", get(worker))
        .route("/v1/config", get(config))
        .fallback(|| async { ApiError::not_found("no_route", "no such endpoint") })
        .with_state(service)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(t)| t).map_err(|e| ApiError::bad_request("invalid_body", e.body_text()))
}

async fn create_arenas(
    State(s): State<Arc<Service>>,
    payload: Result<Json<CreateArenas>, JsonRejection>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let created = s.create_arenas(body(payload)?)?;
    Ok((StatusCode::CREATED, Json(json!({ "arenas": created }))))
}

async fn list_arenas(State(s): State<Arc<Service>>) -> Json<Value> {
    Json(json!({ "arenas": s.list() }))
}

#[derive(Debug, Deserialize)]
struct NextPairQuery {
    worker_id: Option<String>,
    #[serde(default)]
    qualification: bool,
}

async fn next_pair(
    State(s): State<Arc<Service>>,
    Path(id): Path<String>,
    query: Result<Query<NextPairQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<crate::service::NextPair> {
    let Query(q) = query.map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))?;
    let worker = q
        .worker_id
        .and_then(WorkerId::new)
        .ok_or_else(|| ApiError::bad_request("missing_worker", "worker_id is required"))?;
    Ok(Json(s.next_pair(&id, &worker, q.qualification)?))
}

async fn judgment(
    State(s): State<Arc<Service>>,
    payload: Result<Json<Judgment>, JsonRejection>,
) -> ApiResult<crate::service::JudgmentAck> {
    Ok(Json(s.submit(body(payload)?)?))
}

async fn leaderboard(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<crate::service::Leaderboard> {
    Ok(Json(s.leaderboard(&id)?))
}

async fn stats(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<crate::service::Stats> {
    Ok(Json(s.stats(&id)?))
}

async fn advance(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<crate::service::ArenaSummary> {
    Ok(Json(s.advance(&id)?))
}

async fn register_worker(
    State(s): State<Arc<Service>>,
    payload: Result<Json<RegisterWorker>, JsonRejection>,
) -> ApiResult<skillarena_core::WorkerRecord> {
    Ok(Json(s.register_worker(body(payload)?)?))
}

async fn worker(State(s): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<skillarena_core::WorkerRecord> {
    let id = WorkerId::new(id).ok_or_else(|| ApiError::bad_request("missing_worker", "worker id is empty"))?;
    Ok(Json(s.worker(&id)?))
}

async fn config(State(s): State<Arc<Service>>) -> Json<Value> {
    Json(s.client_config())
}

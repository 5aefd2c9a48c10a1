//! HTTP/JSON routes.
//!
//! | method | path                    | success                      |
//! |--------|-------------------------|------------------------------|
//! | POST   | /v1/work                | 201 `{"job_id"}`             |
//! | GET    | /v1/work                | 200 list of status objects   |
//! | GET    | /v1/work/{id}           | 200 status object            |
//! | GET    | /v1/work/{id}/results   | 200 counts and metadata      |
//! | POST   | /v1/work/{id}/cancel    | 200 status object            |
//! | GET    | /v1/devices             | 200 list of devices          |
//! | GET    | /v1/health              | 200 `{"status":"ok"}`        |
//!
//! Errors carry `{"error": <message>, "code": <kind>}` plus context fields.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, SecondsFormat, Utc};
use conqure_core::{parse_workload, CountsMap, WorkloadDocument, WorkloadError};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::{json, Value};
use tracing::error;

use crate::model::{JobRecord, JobStatus, Priority};
use crate::scheduler::{SchedError, Scheduler};
use crate::store::{JobFilter, NewJob, StoreError};

#[derive(Clone)]
pub struct AppState {
    pub scheduler: Arc<Scheduler>,
    pub auth_token: Option<Arc<str>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/work", post(create_work).get(list_work))
        .route("/v1/work/{id}", get(get_status))
        .route("/v1/work/{id}/results", get(get_results))
        .route("/v1/work/{id}/cancel", post(cancel_work))
        .route("/v1/devices", get(list_devices))
        .route("/v1/health", get(|| async { Json(json!({"status": "ok"})) }))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Timestamps on the wire: RFC 3339, UTC, microseconds.
pub fn wire_time(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkStatusResponse {
    pub job_id: String,
    pub status: JobStatus,
    pub device_id: String,
    pub priority: Priority,
    pub submitted_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_position: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub submitted_at: String,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsResponse {
    pub job_id: String,
    pub counts: CountsMap,
    pub seed: u64,
    pub device_id: String,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateWorkResponse {
    pub job_id: String,
}

/// Request body. `workload` may be the document itself or a JSON string
/// holding it.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateWorkRequest<'a> {
    #[serde(borrow)]
    workload: &'a RawValue,
    device_id: String,
    #[serde(default)]
    priority: Priority,
}

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl ToString) -> Self {
        ApiError { status, body: json!({"error": message.to_string(), "code": code}) }
    }

    fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.body[key] = serde_json::to_value(value).unwrap_or(Value::Null);
        self
    }

    fn not_found(job_id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("job `{job_id}` not found")).with("job_id", job_id)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        error!("internal error: {e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::not_found(&id),
            StoreError::Invalid(msg) => ApiError::new(StatusCode::BAD_REQUEST, "validation", msg),
            other => ApiError::internal(other),
        }
    }
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.auth_token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_ref()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
                .into_response();
        }
    }
    next.run(request).await
}

fn workload_error(e: WorkloadError, base: usize) -> ApiError {
    let err = ApiError::new(StatusCode::BAD_REQUEST, "validation", &e);
    match e {
        WorkloadError::Syntax { line, column, .. } => err.with("position", json!({"line": line, "column": column})),
        WorkloadError::Semantic { offset, ref path, .. } => {
            err.with("position", json!({"offset": base + offset})).with("path", format!("workload.{path}"))
        }
        WorkloadError::Encoding { offset } => err.with("position", json!({"offset": base + offset})),
    }
}

/// Parses the request body. Positions in errors are relative to the body
/// (offsets) or the embedded workload string (line/column).
fn parse_request(body: &[u8]) -> Result<(WorkloadDocument, String, Priority), ApiError> {
    let text = std::str::from_utf8(body).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "validation", "body is not UTF-8")
            .with("position", json!({"offset": e.valid_up_to()}))
    })?;
    let req: CreateWorkRequest<'_> = serde_json::from_str(text).map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, "validation", &e)
            .with("position", json!({"line": e.line(), "column": e.column()}))
    })?;
    let raw = req.workload.get();
    let doc = if raw.starts_with('"') {
        let inner: String =
            serde_json::from_str(raw).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "validation", e))?;
        parse_workload(inner.as_bytes()).map_err(|e| workload_error(e, 0))?
    } else {
        let base = raw.as_ptr() as usize - text.as_ptr() as usize;
        parse_workload(raw.as_bytes()).map_err(|e| workload_error(e, base))?
    };
    if req.device_id.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "validation", "device_id must be nonempty"));
    }
    Ok((doc, req.device_id, req.priority))
}

fn seed_from_metadata(doc: &WorkloadDocument) -> Result<Option<u64>, ApiError> {
    doc.metadata
        .get("seed")
        .map(|s| {
            s.trim().parse::<u64>().map_err(|_| {
                ApiError::new(StatusCode::BAD_REQUEST, "validation", format!("metadata seed `{s}` is not a u64"))
            })
        })
        .transpose()
}

async fn create_work(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let (workload, device_id, priority) = parse_request(&body)?;
    let seed = seed_from_metadata(&workload)?;
    let sched = Arc::clone(&state.scheduler);
    tokio::task::spawn_blocking(move || {
        let record = sched.store().insert(NewJob { device_id, priority, workload, seed })?;
        let job_id = record.job_id;
        match sched.enqueue(&job_id) {
            Ok(()) => Ok((StatusCode::CREATED, Json(CreateWorkResponse { job_id })).into_response()),
            Err(SchedError::UnknownDevice(d)) => {
                Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_device", format!("unknown device `{d}`"))
                    .with("job_id", job_id)
                    .with("device_id", d))
            }
            Err(SchedError::Capability(msg)) => {
                Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "capability", msg).with("job_id", job_id))
            }
            Err(SchedError::Store(e)) => Err(e.into()),
            Err(other) => Err(ApiError::internal(other)),
        }
    })
    .await
    .map_err(ApiError::internal)?
}

fn status_of(record: JobRecord, position: Option<usize>) -> WorkStatusResponse {
    let queued = record.status == JobStatus::Queued;
    WorkStatusResponse {
        job_id: record.job_id,
        status: record.status,
        device_id: record.device_id,
        priority: record.priority,
        submitted_at: wire_time(record.submitted_at),
        started_at: record.started_at.map(wire_time),
        finished_at: record.finished_at.map(wire_time),
        queue_position: if queued { position } else { None },
        error: record.error,
    }
}

fn snapshot(sched: &Scheduler, job_id: &str) -> Result<WorkStatusResponse, ApiError> {
    let before = sched.store().get(job_id)?;
    // Position first, then status: a job dequeued in between shows no position.
    let position = sched.queue_position(job_id, &before.device_id);
    let record = sched.store().get(job_id)?;
    Ok(status_of(record, position))
}

async fn get_status(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<WorkStatusResponse>, ApiError> {
    snapshot(&state.scheduler, &id).map(Json)
}

#[derive(Deserialize)]
struct ListQuery {
    status: Option<String>,
    device_id: Option<String>,
    limit: Option<usize>,
}

async fn list_work(
    State(state): State<AppState>,
    Query(q): Query<ListQuery>,
) -> Result<Json<Vec<WorkStatusResponse>>, ApiError> {
    let status = q
        .status
        .map(|s| s.parse::<JobStatus>().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "validation", e)))
        .transpose()?;
    let sched = &state.scheduler;
    let records = sched.store().list(&JobFilter { status, device_id: q.device_id, limit: q.limit });
    Ok(Json(
        records
            .into_iter()
            .map(|r| {
                let pos = sched.queue_position(&r.job_id, &r.device_id);
                status_of(r, pos)
            })
            .collect(),
    ))
}

async fn get_results(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = state.scheduler.store().get(&id)?;
    match record.status {
        JobStatus::Completed => {
            let timing = Timing {
                submitted_at: wire_time(record.submitted_at),
                started_at: wire_time(record.started_at.unwrap_or(record.submitted_at)),
                finished_at: wire_time(record.finished_at.unwrap_or(record.submitted_at)),
            };
            let body = ResultsResponse {
                job_id: record.job_id,
                counts: record.result.ok_or_else(|| ApiError::internal("completed job without counts"))?,
                seed: record.seed,
                device_id: record.device_id,
                timing,
            };
            Ok(Json(body).into_response())
        }
        JobStatus::Queued | JobStatus::Running => Ok((
            StatusCode::CONFLICT,
            Json(json!({"job_id": record.job_id, "status": record.status, "error": "results not ready", "code": "not_ready"})),
        )
            .into_response()),
        JobStatus::Failed | JobStatus::Cancelled => Ok((
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(json!({
                "job_id": record.job_id,
                "status": record.status,
                "error": record.error.unwrap_or_else(|| "job was cancelled".into()),
                "code": "job_failed",
            })),
        )
            .into_response()),
    }
}

async fn cancel_work(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let sched = Arc::clone(&state.scheduler);
    tokio::task::spawn_blocking(move || match sched.cancel(&id) {
        Ok(()) => Ok(Json(snapshot(&sched, &id)?).into_response()),
        Err(SchedError::Store(StoreError::IllegalTransition { from, .. })) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_cancellable",
            format!("job is {from}; only QUEUED jobs can be cancelled"),
        )
        .with("job_id", &id)
        .with("status", from)),
        Err(SchedError::Store(e)) => Err(e.into()),
        Err(other) => Err(ApiError::internal(other)),
    })
    .await
    .map_err(ApiError::internal)?
}

async fn list_devices(State(state): State<AppState>) -> Json<Value> {
    Json(serde_json::to_value(state.scheduler.devices()).unwrap_or_else(|_| json!([])))
}

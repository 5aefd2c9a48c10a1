//! Blocking HTTP client for the queue service.

use std::time::{Duration, Instant};

use conqure_core::WorkloadDocument;
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use thiserror::Error;

use crate::api::{CreateWorkResponse, ResultsResponse, WorkStatusResponse};
use crate::device::DeviceDescriptor;
use crate::model::{JobStatus, Priority};

pub const URL_ENV: &str = "CONQURE_URL";
pub const DEFAULT_URL: &str = "http://127.0.0.1:8042";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("job {job_id} not ready (status {status})")]
    NotReady { job_id: String, status: JobStatus },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("capability mismatch: {0}")]
    Capability(String),
    #[error("job {job_id} {status}: {message}")]
    JobFailed { job_id: String, status: JobStatus, message: String },
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("server error ({status}): {message}")]
    Server { status: u16, message: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone)]
pub struct QueueClient {
    base: String,
    http: Client,
    poll_interval: Duration,
    token: Option<String>,
}

impl QueueClient {
    pub fn new(base_url: impl Into<String>) -> Result<Self, ClientError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(QueueClient {
            base: base_url.into().trim_end_matches('/').to_owned(),
            http,
            poll_interval: Duration::from_millis(20),
            token: None,
        })
    }

    /// Uses `CONQURE_URL`, falling back to the local default.
    pub fn from_env() -> Result<Self, ClientError> {
        Self::new(std::env::var(URL_ENV).unwrap_or_else(|_| DEFAULT_URL.into()))
    }

    pub fn with_poll_interval(mut self, interval: Duration) -> Self {
        self.poll_interval = interval;
        self
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn send(&self, req: reqwest::blocking::RequestBuilder) -> Result<Response, ClientError> {
        let req = match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        };
        req.send().map_err(|e| ClientError::Transport(e.to_string()))
    }

    /// Submits a workload; returns the job id as soon as it is queued.
    pub fn create_work(
        &self,
        workload: &WorkloadDocument,
        device_id: &str,
        priority: Priority,
    ) -> Result<String, ClientError> {
        // The document goes in verbatim so parameter literals are not re-rounded.
        let body = format!(
            r#"{{"workload":{},"device_id":{},"priority":{}}}"#,
            workload.to_json(),
            json!(device_id),
            json!(priority)
        );
        self.create_work_raw(body)
    }

    /// Posts a pre-built request body.
    pub fn create_work_raw(&self, body: String) -> Result<String, ClientError> {
        let resp = self.send(
            self.http
                .post(format!("{}/v1/work", self.base))
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body),
        )?;
        Ok(parse::<CreateWorkResponse>(resp)?.job_id)
    }

    pub fn status(&self, job_id: &str) -> Result<WorkStatusResponse, ClientError> {
        parse(self.send(self.http.get(format!("{}/v1/work/{job_id}", self.base)))?)
    }

    pub fn results(&self, job_id: &str) -> Result<ResultsResponse, ClientError> {
        parse(self.send(self.http.get(format!("{}/v1/work/{job_id}/results", self.base)))?)
    }

    pub fn cancel(&self, job_id: &str) -> Result<WorkStatusResponse, ClientError> {
        parse(self.send(self.http.post(format!("{}/v1/work/{job_id}/cancel", self.base)))?)
    }

    pub fn devices(&self) -> Result<Vec<DeviceDescriptor>, ClientError> {
        parse(self.send(self.http.get(format!("{}/v1/devices", self.base)))?)
    }

    pub fn list(
        &self,
        status: Option<JobStatus>,
        limit: Option<usize>,
    ) -> Result<Vec<WorkStatusResponse>, ClientError> {
        let mut query = Vec::new();
        if let Some(s) = status {
            query.push(format!("status={}", s.as_str()));
        }
        if let Some(l) = limit {
            query.push(format!("limit={l}"));
        }
        let url = format!("{}/v1/work?{}", self.base, query.join("&"));
        let req = self.http.get(url);
        parse(self.send(req)?)
    }

    /// Polls until the job is terminal. Failure is a status, not an error.
    pub fn wait_until_done(&self, job_id: &str, timeout: Duration) -> Result<JobStatus, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let status = self.status(job_id)?.status;
            if status.is_terminal() {
                return Ok(status);
            }
            if Instant::now() >= deadline {
                return Err(ClientError::Timeout(timeout));
            }
            std::thread::sleep(self.poll_interval.min(deadline.saturating_duration_since(Instant::now())));
        }
    }
}

fn parse<T: DeserializeOwned>(resp: Response) -> Result<T, ClientError> {
    let status = resp.status();
    let bytes = resp.bytes().map_err(|e| ClientError::Transport(e.to_string()))?;
    if status.is_success() {
        return serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol(e.to_string()));
    }
    let body: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    let message = body["error"].as_str().unwrap_or("").to_owned();
    let job_id = body["job_id"].as_str().unwrap_or("").to_owned();
    let job_status = serde_json::from_value::<JobStatus>(body["status"].clone());
    Err(match (status, job_status) {
        (StatusCode::NOT_FOUND, _) => ClientError::NotFound(message),
        (StatusCode::BAD_REQUEST, _) => ClientError::Validation(message),
        (StatusCode::CONFLICT, Ok(s)) if body["code"] == "not_ready" => ClientError::NotReady { job_id, status: s },
        (StatusCode::CONFLICT, _) => ClientError::Validation(message),
        (StatusCode::UNPROCESSABLE_ENTITY, Ok(s)) => ClientError::JobFailed { job_id, status: s, message },
        (StatusCode::UNPROCESSABLE_ENTITY, Err(_)) => ClientError::Capability(message),
        (s, _) => ClientError::Server { status: s.as_u16(), message },
    })
}

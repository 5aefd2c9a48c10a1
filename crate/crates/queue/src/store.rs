//! Embedded single-file job store.
//!
//! Every mutation appends the full updated record as one JSON line and (by
//! default) fsyncs before returning, so an acknowledged write survives a
//! crash. Opening replays the log (last line per job wins), drops a torn
//! final line, and rewrites the file compacted to one line per job.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use conqure_core::{CountsMap, WorkloadDocument};
use thiserror::Error;
use uuid::Uuid;

use crate::model::{now_micros, JobRecord, JobStatus, Priority};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O failure: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt store at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("job `{0}` not found")]
    NotFound(String),
    #[error("illegal transition {from} -> {to} for job `{job_id}`")]
    IllegalTransition { job_id: String, from: JobStatus, to: JobStatus },
    #[error("transition to {status} needs {expected}")]
    PayloadMismatch { status: JobStatus, expected: &'static str },
    #[error("invalid job: {0}")]
    Invalid(String),
}

/// Data carried by a transition. Its variant must match the target status.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    None,
    Counts(CountsMap),
    Error(String),
}

#[derive(Debug, Clone)]
pub struct NewJob {
    pub device_id: String,
    pub priority: Priority,
    pub workload: WorkloadDocument,
    /// Chosen randomly when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct JobFilter {
    pub status: Option<JobStatus>,
    pub device_id: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    /// fsync after every append.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions { sync: true }
    }
}

struct Inner {
    jobs: HashMap<String, JobRecord>,
    log: File,
}

pub struct JobStore {
    path: PathBuf,
    options: StoreOptions,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for JobStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JobStore").field("path", &self.path).finish_non_exhaustive()
    }
}

impl JobStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(path, StoreOptions::default())
    }

    pub fn open_with(path: impl AsRef<Path>, options: StoreOptions) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let jobs = match File::open(&path) {
            Ok(f) => replay(BufReader::new(f))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => HashMap::new(),
            Err(e) => return Err(e.into()),
        };
        compact(&path, &jobs)?;
        let log = OpenOptions::new().append(true).open(&path)?;
        Ok(JobStore { path, options, inner: Mutex::new(Inner { jobs, log }) })
    }

    /// Replays the log without taking ownership of it: no compaction, no
    /// writes, safe against a live service. Oldest submission first.
    pub fn snapshot(path: impl AsRef<Path>) -> Result<Vec<JobRecord>, StoreError> {
        let jobs = replay(BufReader::new(File::open(path)?))?;
        let mut records: Vec<JobRecord> = jobs.into_values().collect();
        records.sort_by(|a, b| (a.submitted_at, &a.job_id).cmp(&(b.submitted_at, &b.job_id)));
        Ok(records)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn append(&self, inner: &mut Inner, record: &JobRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        inner.log.write_all(&line)?;
        if self.options.sync {
            inner.log.sync_data()?;
        }
        Ok(())
    }

    /// Persists a new QUEUED job and returns it with a fresh id.
    pub fn insert(&self, job: NewJob) -> Result<JobRecord, StoreError> {
        if job.device_id.trim().is_empty() {
            return Err(StoreError::Invalid("device_id must be nonempty".into()));
        }
        let record = JobRecord {
            job_id: Uuid::now_v7().to_string(),
            device_id: job.device_id,
            priority: job.priority,
            workload: job.workload,
            status: JobStatus::Queued,
            submitted_at: now_micros(),
            started_at: None,
            finished_at: None,
            result: None,
            error: None,
            seed: job.seed.unwrap_or_else(rand_seed),
        };
        let mut inner = self.lock();
        self.append(&mut inner, &record)?;
        inner.jobs.insert(record.job_id.clone(), record.clone());
        Ok(record)
    }

    /// Atomically moves a job along a legal lifecycle edge. `started_at` is
    /// set on entering RUNNING and `finished_at` on entering a terminal state.
    pub fn transition(&self, job_id: &str, to: JobStatus, payload: Payload) -> Result<JobRecord, StoreError> {
        let mut inner = self.lock();
        let current = inner.jobs.get(job_id).ok_or_else(|| StoreError::NotFound(job_id.to_owned()))?;
        if !current.status.can_transition_to(to) {
            return Err(StoreError::IllegalTransition { job_id: job_id.to_owned(), from: current.status, to });
        }
        let mut next = current.clone();
        match (to, payload) {
            (JobStatus::Completed, Payload::Counts(counts)) => next.result = Some(counts),
            (JobStatus::Completed, _) => {
                return Err(StoreError::PayloadMismatch { status: to, expected: "counts" });
            }
            (JobStatus::Failed, Payload::Error(msg)) => next.error = Some(msg),
            (JobStatus::Failed, _) => {
                return Err(StoreError::PayloadMismatch { status: to, expected: "an error message" });
            }
            (_, Payload::None) => {}
            (_, _) => return Err(StoreError::PayloadMismatch { status: to, expected: "no payload" }),
        }
        let now = now_micros().max(next.submitted_at);
        next.status = to;
        if to == JobStatus::Running {
            next.started_at = Some(now);
        }
        if to.is_terminal() {
            next.finished_at = Some(now.max(next.started_at.unwrap_or(now)));
        }
        self.append(&mut inner, &next)?;
        inner.jobs.insert(job_id.to_owned(), next.clone());
        Ok(next)
    }

    pub fn get(&self, job_id: &str) -> Result<JobRecord, StoreError> {
        self.lock().jobs.get(job_id).cloned().ok_or_else(|| StoreError::NotFound(job_id.to_owned()))
    }

    /// Matching records, newest submission first.
    pub fn list(&self, filter: &JobFilter) -> Vec<JobRecord> {
        let mut out: Vec<JobRecord> = self
            .lock()
            .jobs
            .values()
            .filter(|r| filter.status.is_none_or(|s| r.status == s))
            .filter(|r| filter.device_id.as_deref().is_none_or(|d| r.device_id == d))
            .cloned()
            .collect();
        out.sort_by(|a, b| (b.submitted_at, &b.job_id).cmp(&(a.submitted_at, &a.job_id)));
        if let Some(limit) = filter.limit {
            out.truncate(limit);
        }
        out
    }

    /// Jobs still QUEUED, oldest first.
    pub fn queued(&self) -> Vec<JobRecord> {
        let mut out = self.list(&JobFilter { status: Some(JobStatus::Queued), ..Default::default() });
        out.reverse();
        out
    }

    /// Puts every RUNNING job back to QUEUED, clearing `started_at`. Used at
    /// startup: a RUNNING record means the previous process died mid-job.
    /// Re-execution reuses the stored seed, so results are unchanged.
    pub fn requeue_interrupted(&self) -> Result<Vec<String>, StoreError> {
        let mut inner = self.lock();
        let ids: Vec<String> =
            inner.jobs.values().filter(|r| r.status == JobStatus::Running).map(|r| r.job_id.clone()).collect();
        for id in &ids {
            let mut rec = inner.jobs[id].clone();
            rec.status = JobStatus::Queued;
            rec.started_at = None;
            self.append(&mut inner, &rec)?;
            inner.jobs.insert(id.clone(), rec);
        }
        Ok(ids)
    }

    /// Writes every record as one JSON line, oldest first.
    pub fn dump(&self, mut out: impl Write) -> Result<usize, StoreError> {
        let mut records = self.list(&JobFilter::default());
        records.reverse();
        for r in &records {
            serde_json::to_writer(&mut out, r).map_err(io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(records.len())
    }

    pub fn len(&self) -> usize {
        self.lock().jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn rand_seed() -> u64 {
    rand::random()
}

fn replay(reader: impl BufRead) -> Result<HashMap<String, JobRecord>, StoreError> {
    let mut jobs = HashMap::new();
    let mut lines = reader.split(b'\n').enumerate().peekable();
    while let Some((i, line)) = lines.next() {
        let line = line?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match serde_json::from_slice::<JobRecord>(&line) {
            Ok(rec) => {
                jobs.insert(rec.job_id.clone(), rec);
            }
            // A torn final write from a crash: the mutation was never acknowledged.
            Err(_) if lines.peek().is_none() => break,
            Err(e) => return Err(StoreError::Corrupt { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(jobs)
}

fn compact(path: &Path, jobs: &HashMap<String, JobRecord>) -> Result<(), StoreError> {
    let tmp = path.with_extension("compact.tmp");
    {
        let mut f = File::create(&tmp)?;
        let mut records: Vec<&JobRecord> = jobs.values().collect();
        records.sort_by(|a, b| (a.submitted_at, &a.job_id).cmp(&(b.submitted_at, &b.job_id)));
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).map_err(io::Error::other)?;
            buf.push(b'\n');
        }
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        // Persist the rename itself.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

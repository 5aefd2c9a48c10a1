//! Executors run one finalized task document and return its counts.

use std::ffi::OsString;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use conqure_core::{CountsMap, SimConfig, Simulator, WorkloadDocument};
use conqure_queue::{ClientError, JobStatus, Priority, QueueClient};
use thiserror::Error;

use crate::message::{parse_map_from, parse_map_to, MessageError, OffloadMessage, SEED_KEY};

#[derive(Debug, Error)]
pub enum OffloadError {
    #[error("cannot start executor {program}: {message}")]
    Spawn { program: String, message: String },
    #[error("executor pipe error: {0}")]
    Pipe(String),
    #[error("executor exited with {status}: {stderr}")]
    ExecutorFailed { status: String, stderr: String },
    #[error(transparent)]
    Message(#[from] MessageError),
    #[error("task error: {0}")]
    Task(String),
    #[error("remote job {job_id} {status}: {message}")]
    Remote { job_id: String, status: JobStatus, message: String },
    #[error("queue client: {0}")]
    Client(#[from] ClientError),
    #[error("device index {index} out of range for {qpus} QPU(s)")]
    NoSuchDevice { index: usize, qpus: usize },
    #[error("executor panicked")]
    Panicked,
}

pub trait Executor: Send + Sync {
    fn execute(&self, document: &WorkloadDocument) -> Result<CountsMap, OffloadError>;

    fn describe(&self) -> String;
}

/// Seed for a task document: metadata `seed`, else 0.
pub fn document_seed(document: &WorkloadDocument) -> Result<u64, OffloadError> {
    match document.metadata.get(SEED_KEY) {
        None => Ok(0),
        Some(s) => s.trim().parse().map_err(|_| OffloadError::Task(format!("metadata seed `{s}` is not a u64"))),
    }
}

/// Spawns one executor process per task and talks to it over its standard
/// streams.
#[derive(Debug, Clone)]
pub struct PipeExecutor {
    program: PathBuf,
    args: Vec<OsString>,
}

impl PipeExecutor {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        PipeExecutor { program: program.into(), args: Vec::new() }
    }

    pub fn arg(mut self, arg: impl Into<OsString>) -> Self {
        self.args.push(arg.into());
        self
    }

    pub fn args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<OsString>,
    {
        self.args.extend(args.into_iter().map(Into::into));
        self
    }

    pub fn program(&self) -> &Path {
        &self.program
    }
}

impl Executor for PipeExecutor {
    fn execute(&self, document: &WorkloadDocument) -> Result<CountsMap, OffloadError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| OffloadError::Spawn { program: self.program.display().to_string(), message: e.to_string() })?;

        let request = OffloadMessage::ToDevice(document.clone()).to_line();
        let mut stdin = child.stdin.take().expect("piped stdin");
        // A child that dies early closes its end; its exit status says why.
        let write_result = stdin.write_all(request.as_bytes()).and_then(|_| stdin.flush());
        drop(stdin);

        let mut stderr = child.stderr.take().expect("piped stderr");
        let stderr_reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });
        let mut line = String::new();
        let read_result = BufReader::new(child.stdout.take().expect("piped stdout")).read_line(&mut line);
        let status = child.wait().map_err(|e| OffloadError::Pipe(e.to_string()))?;
        let stderr = stderr_reader.join().unwrap_or_default();

        if !status.success() {
            return Err(OffloadError::ExecutorFailed { status: status.to_string(), stderr: stderr.trim().to_owned() });
        }
        write_result.map_err(|e| OffloadError::Pipe(format!("writing request: {e}")))?;
        read_result.map_err(|e| OffloadError::Pipe(format!("reading response: {e}")))?;
        Ok(parse_map_from(&line, document.circuit.shots())?)
    }

    fn describe(&self) -> String {
        format!("pipe:{}", self.program.display())
    }
}

/// Runs the simulator in-process. `device_time` is the minimum wall time
/// of one execution, modelling QPU occupancy that costs no host CPU.
#[derive(Debug, Clone, Default)]
pub struct LocalExecutor {
    pub sim: SimConfig,
    pub device_time: Duration,
}

impl LocalExecutor {
    pub fn new(device_time: Duration) -> Self {
        LocalExecutor { sim: SimConfig::default(), device_time }
    }
}

impl Executor for LocalExecutor {
    fn execute(&self, document: &WorkloadDocument) -> Result<CountsMap, OffloadError> {
        let start = Instant::now();
        let counts = run_document(document, self.sim)?;
        if let Some(rest) = self.device_time.checked_sub(start.elapsed()) {
            thread::sleep(rest);
        }
        Ok(counts)
    }

    fn describe(&self) -> String {
        format!("local:{}ms", self.device_time.as_millis())
    }
}

pub(crate) fn run_document(document: &WorkloadDocument, sim: SimConfig) -> Result<CountsMap, OffloadError> {
    let seed = document_seed(document)?;
    Simulator::new(SimConfig { seed, ..sim }).run(&document.circuit).map_err(|e| OffloadError::Task(e.to_string()))
}

/// Submits to a queue service device and polls until the job finishes.
#[derive(Debug, Clone)]
pub struct QueueExecutor {
    client: QueueClient,
    device_id: String,
    priority: Priority,
    timeout: Duration,
}

impl QueueExecutor {
    pub fn new(client: QueueClient, device_id: impl Into<String>) -> Self {
        QueueExecutor {
            client,
            device_id: device_id.into(),
            priority: Priority::Low,
            timeout: Duration::from_secs(300),
        }
    }

    pub fn with_priority(mut self, priority: Priority) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl Executor for QueueExecutor {
    fn execute(&self, document: &WorkloadDocument) -> Result<CountsMap, OffloadError> {
        let job_id = self.client.create_work(document, &self.device_id, self.priority)?;
        let status = self.client.wait_until_done(&job_id, self.timeout)?;
        if status != JobStatus::Completed {
            let message = self.client.status(&job_id)?.error.unwrap_or_else(|| status.to_string());
            return Err(OffloadError::Remote { job_id, status, message });
        }
        let counts = self.client.results(&job_id)?.counts;
        counts.check_shots(document.circuit.shots()).map_err(MessageError::from)?;
        Ok(counts)
    }

    fn describe(&self) -> String {
        format!("queue:{}/{}", self.client.base_url(), self.device_id)
    }
}

/// Device side of the pipe protocol: reads one request line, writes one
/// counts line. `tap` receives the mapped-in arrays as observed here, with
/// each value's IEEE-754 bits, so hosts can check exact transfer.
pub fn serve_pipe(
    input: impl BufRead,
    mut output: impl Write,
    device_time: Duration,
    tap: Option<&Path>,
) -> Result<(), OffloadError> {
    let start = Instant::now();
    let mut input = input;
    let mut line = String::new();
    input.read_line(&mut line).map_err(|e| OffloadError::Pipe(e.to_string()))?;
    let OffloadMessage::ToDevice(document) = OffloadMessage::parse_to_device(&line)? else {
        unreachable!("parse_to_device yields ToDevice")
    };
    if let Some(path) = tap {
        let mapped = parse_map_to(&document.metadata)?;
        let observed: serde_json::Map<String, serde_json::Value> = mapped
            .iter()
            .map(|(name, values)| {
                let bits: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
                (name.clone(), serde_json::json!({"values": values, "bits": bits}))
            })
            .collect();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| OffloadError::Pipe(format!("tap {}: {e}", path.display())))?;
        writeln!(f, "{}", serde_json::Value::Object(observed)).map_err(|e| OffloadError::Pipe(e.to_string()))?;
    }
    let counts = run_document(&document, SimConfig::default())?;
    if let Some(rest) = device_time.checked_sub(start.elapsed()) {
        thread::sleep(rest);
    }
    output
        .write_all(OffloadMessage::FromDevice(counts).to_line().as_bytes())
        .and_then(|_| output.flush())
        .map_err(|e| OffloadError::Pipe(e.to_string()))
}

/// Executors bound to logical QPU indices, with an in-flight gauge.
#[derive(Clone)]
pub struct QpuPool {
    executors: Vec<Arc<dyn Executor>>,
    in_flight: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
}

impl QpuPool {
    pub fn new(executors: Vec<Arc<dyn Executor>>) -> Self {
        QpuPool { executors, in_flight: Arc::default(), peak: Arc::default() }
    }

    /// `count` QPUs sharing one executor.
    pub fn uniform(executor: Arc<dyn Executor>, count: usize) -> Self {
        Self::new(vec![executor; count])
    }

    pub fn local(count: usize, device_time: Duration) -> Self {
        Self::uniform(Arc::new(LocalExecutor::new(device_time)), count)
    }

    pub fn pipe(executor: PipeExecutor, count: usize) -> Self {
        Self::uniform(Arc::new(executor), count)
    }

    pub fn len(&self) -> usize {
        self.executors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.executors.is_empty()
    }

    /// Runs `document` on QPU `index`, tracking concurrency.
    pub fn execute(&self, index: usize, document: &WorkloadDocument) -> Result<CountsMap, OffloadError> {
        let executor =
            self.executors.get(index).ok_or(OffloadError::NoSuchDevice { index, qpus: self.executors.len() })?;
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        let result = executor.execute(document);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }

    /// Highest number of simultaneous executions since the last reset.
    pub fn peak_concurrency(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn reset_peak(&self) {
        self.peak.store(0, Ordering::SeqCst);
    }
}

impl std::fmt::Debug for QpuPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.executors.iter().map(|e| e.describe())).finish()
    }
}

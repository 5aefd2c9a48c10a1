//! Device registry, per-device queues and the worker pool.
//!
//! Each registered device owns one queue and `slots` worker threads. A
//! worker claims a job by moving it QUEUED → RUNNING in the store while
//! holding the device queue lock, so a job is claimed at most once.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use conqure_core::{SimConfig, Simulator};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::device::{DeviceDescriptor, QueuePolicy};
use crate::model::{JobStatus, Priority};
use crate::store::{JobStore, Payload, StoreError};

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("device `{0}` is already registered")]
    DuplicateDevice(String),
    #[error("invalid device: {0}")]
    InvalidDevice(String),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("capability mismatch: {0}")]
    Capability(String),
    #[error("job `{0}` is not QUEUED")]
    NotQueued(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
struct QueueEntry {
    job_id: String,
    priority: Priority,
    submitted_at: DateTime<Utc>,
    seq: u64,
    num_qubits: usize,
    /// Set when this entry is first seen at the head of its level under
    /// QUBIT_AFFINITY: only matching jobs enqueued before then may overtake it.
    horizon: Option<u64>,
}

impl QueueEntry {
    fn fifo_key(&self) -> (std::cmp::Reverse<Priority>, DateTime<Utc>, u64) {
        (std::cmp::Reverse(self.priority), self.submitted_at, self.seq)
    }
}

#[derive(Debug, Default)]
struct DeviceQueue {
    entries: Vec<QueueEntry>,
    last_qubits: Option<usize>,
}

impl DeviceQueue {
    /// Index of the next job to run under `policy`.
    fn pick(&mut self, policy: QueuePolicy, next_seq: u64) -> Option<usize> {
        let head = (0..self.entries.len()).min_by_key(|&i| self.entries[i].fifo_key())?;
        if policy == QueuePolicy::PriorityFifo {
            return Some(head);
        }
        let Some(last) = self.last_qubits else { return Some(head) };
        if self.entries[head].num_qubits == last {
            return Some(head);
        }
        let level = self.entries[head].priority;
        let horizon = *self.entries[head].horizon.get_or_insert(next_seq);
        (0..self.entries.len())
            .filter(|&i| {
                let e = &self.entries[i];
                e.priority == level && e.num_qubits == last && e.seq < horizon
            })
            .min_by_key(|&i| self.entries[i].fifo_key())
            .or(Some(head))
    }
}

struct Device {
    descriptor: DeviceDescriptor,
    queue: Mutex<DeviceQueue>,
    ready: Condvar,
}

impl Device {
    fn lock(&self) -> MutexGuard<'_, DeviceQueue> {
        self.queue.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct Scheduler {
    store: Arc<JobStore>,
    sim: SimConfig,
    devices: RwLock<BTreeMap<String, Arc<Device>>>,
    next_seq: AtomicU64,
    shutdown: AtomicBool,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Scheduler {
    /// `sim` supplies the qubit guard and kernel; seeds come from each job.
    pub fn new(store: Arc<JobStore>, sim: SimConfig) -> Arc<Self> {
        Arc::new(Scheduler {
            store,
            sim,
            devices: RwLock::new(BTreeMap::new()),
            next_seq: AtomicU64::new(0),
            shutdown: AtomicBool::new(false),
            workers: Mutex::new(Vec::new()),
        })
    }

    pub fn store(&self) -> &Arc<JobStore> {
        &self.store
    }

    fn device(&self, device_id: &str) -> Option<Arc<Device>> {
        self.devices.read().unwrap_or_else(|p| p.into_inner()).get(device_id).cloned()
    }

    /// Registers a device and starts one worker per slot.
    pub fn register_device(self: &Arc<Self>, descriptor: DeviceDescriptor) -> Result<(), SchedError> {
        self.register_device_with(descriptor, true)
    }

    /// Registers a device, optionally without workers; such a device only
    /// makes progress through explicit [`Scheduler::dequeue_next`] calls.
    pub fn register_device_with(
        self: &Arc<Self>,
        descriptor: DeviceDescriptor,
        start_workers: bool,
    ) -> Result<(), SchedError> {
        descriptor.validate().map_err(SchedError::InvalidDevice)?;
        let device = Arc::new(Device {
            descriptor: descriptor.clone(),
            queue: Mutex::new(DeviceQueue::default()),
            ready: Condvar::new(),
        });
        {
            let mut devices = self.devices.write().unwrap_or_else(|p| p.into_inner());
            if devices.contains_key(&descriptor.device_id) {
                return Err(SchedError::DuplicateDevice(descriptor.device_id));
            }
            devices.insert(descriptor.device_id.clone(), device);
        }
        info!(device = %descriptor.device_id, qubits = descriptor.num_qubits, slots = descriptor.slots, "registered device");
        if start_workers {
            let mut workers = self.workers.lock().unwrap_or_else(|p| p.into_inner());
            for slot in 0..descriptor.slots {
                let sched = Arc::clone(self);
                let id = descriptor.device_id.clone();
                let handle = thread::Builder::new()
                    .name(format!("worker-{id}-{slot}"))
                    .spawn(move || sched.worker_loop(&id))
                    .expect("spawn worker thread");
                workers.push(handle);
            }
        }
        Ok(())
    }

    pub fn devices(&self) -> Vec<DeviceDescriptor> {
        self.devices.read().unwrap_or_else(|p| p.into_inner()).values().map(|d| d.descriptor.clone()).collect()
    }

    /// Admits a QUEUED job to its device's queue. Admission failures mark the
    /// job FAILED before returning the error.
    pub fn enqueue(&self, job_id: &str) -> Result<(), SchedError> {
        let record = self.store.get(job_id)?;
        if record.status != JobStatus::Queued {
            return Err(SchedError::NotQueued(job_id.to_owned()));
        }
        let Some(device) = self.device(&record.device_id) else {
            let err = SchedError::UnknownDevice(record.device_id.clone());
            self.store.transition(job_id, JobStatus::Failed, Payload::Error(err.to_string()))?;
            return Err(err);
        };
        if let Err(mismatch) = device.descriptor.admits(&record.workload.circuit) {
            let err = SchedError::Capability(mismatch.to_string());
            self.store.transition(job_id, JobStatus::Failed, Payload::Error(err.to_string()))?;
            return Err(err);
        }
        let entry = QueueEntry {
            job_id: record.job_id,
            priority: record.priority,
            submitted_at: record.submitted_at,
            seq: self.next_seq.fetch_add(1, Ordering::SeqCst),
            num_qubits: record.workload.circuit.num_qubits(),
            horizon: None,
        };
        device.lock().entries.push(entry);
        device.ready.notify_one();
        Ok(())
    }

    /// Claims the next job for `device_id` per its policy, moving it to
    /// RUNNING. Entries whose job is no longer QUEUED (e.g. cancelled) are
    /// discarded.
    pub fn dequeue_next(&self, device_id: &str) -> Result<Option<String>, SchedError> {
        let device = self.device(device_id).ok_or_else(|| SchedError::UnknownDevice(device_id.to_owned()))?;
        let mut queue = device.lock();
        loop {
            let next_seq = self.next_seq.load(Ordering::SeqCst);
            let Some(idx) = queue.pick(device.descriptor.policy, next_seq) else {
                return Ok(None);
            };
            let entry = queue.entries.swap_remove(idx);
            match self.store.transition(&entry.job_id, JobStatus::Running, Payload::None) {
                Ok(_) => {
                    queue.last_qubits = Some(entry.num_qubits);
                    return Ok(Some(entry.job_id));
                }
                Err(StoreError::IllegalTransition { .. } | StoreError::NotFound(_)) => {
                    debug!(job = %entry.job_id, "dropping stale queue entry");
                }
                Err(e) => {
                    // Keep the entry; the store is failing, not the job.
                    queue.entries.push(entry);
                    return Err(e.into());
                }
            }
        }
    }

    /// 1-based position of a QUEUED job in its device queue (priority, then
    /// submission order).
    pub fn queue_position(&self, job_id: &str, device_id: &str) -> Option<usize> {
        let device = self.device(device_id)?;
        let queue = device.lock();
        let me = queue.entries.iter().find(|e| e.job_id == job_id)?;
        let key = me.fifo_key();
        Some(queue.entries.iter().filter(|e| e.fifo_key() < key).count() + 1)
    }

    /// QUEUED → CANCELLED. The stale queue entry is skipped at dequeue time.
    pub fn cancel(&self, job_id: &str) -> Result<(), SchedError> {
        let record = self.store.transition(job_id, JobStatus::Cancelled, Payload::None)?;
        if let Some(device) = self.device(&record.device_id) {
            device.lock().entries.retain(|e| e.job_id != job_id);
        }
        Ok(())
    }

    /// Executes a claimed (RUNNING) job and records the outcome. Simulator
    /// failures become FAILED jobs, never worker errors.
    pub fn worker_run(&self, device_id: &str, job_id: &str) -> Result<JobStatus, SchedError> {
        let device = self.device(device_id).ok_or_else(|| SchedError::UnknownDevice(device_id.to_owned()))?;
        let record = self.store.get(job_id)?;
        if record.status != JobStatus::Running {
            return Err(SchedError::Store(StoreError::IllegalTransition {
                job_id: job_id.to_owned(),
                from: record.status,
                to: JobStatus::Completed,
            }));
        }
        let started = Instant::now();
        let sim = Simulator::new(SimConfig { seed: record.seed, ..self.sim });
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| sim.run(&record.workload.circuit)));
        let hold = Duration::from_millis(device.descriptor.exec_time_ms);
        if let Some(rest) = hold.checked_sub(started.elapsed()) {
            thread::sleep(rest);
        }
        let updated = match outcome {
            Ok(Ok(counts)) => self.store.transition(job_id, JobStatus::Completed, Payload::Counts(counts))?,
            Ok(Err(e)) => self.store.transition(job_id, JobStatus::Failed, Payload::Error(e.to_string()))?,
            Err(_) => self.store.transition(job_id, JobStatus::Failed, Payload::Error("simulator panicked".into()))?,
        };
        Ok(updated.status)
    }

    fn worker_loop(&self, device_id: &str) {
        let Some(device) = self.device(device_id) else { return };
        while !self.shutdown.load(Ordering::SeqCst) {
            match self.dequeue_next(device_id) {
                Ok(Some(job_id)) => {
                    if let Err(e) = self.worker_run(device_id, &job_id) {
                        warn!(job = %job_id, device = device_id, "worker failed to record result: {e}");
                    }
                }
                Ok(None) => {
                    let queue = device.lock();
                    if queue.entries.is_empty() && !self.shutdown.load(Ordering::SeqCst) {
                        let _ = device.ready.wait_timeout(queue, Duration::from_millis(250));
                    }
                }
                Err(e) => {
                    warn!(device = device_id, "dequeue failed: {e}");
                    thread::sleep(Duration::from_millis(100));
                }
            }
        }
    }

    /// Stops worker loops after their current job. Running jobs are not
    /// interrupted; jobs left RUNNING by a process exit are re-queued on the
    /// next start.
    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
        for device in self.devices.read().unwrap_or_else(|p| p.into_inner()).values() {
            device.ready.notify_all();
        }
    }

    /// Waits for all worker threads after [`Scheduler::shutdown`].
    pub fn join(&self) {
        let handles = std::mem::take(&mut *self.workers.lock().unwrap_or_else(|p| p.into_inner()));
        for h in handles {
            let _ = h.join();
        }
    }
}

//! Durable job queue for quantum workloads: job store, device scheduler,
//! HTTP service and a blocking client.

pub mod api;
pub mod client;
pub mod config;
pub mod device;
pub mod model;
pub mod scheduler;
pub mod service;
pub mod store;

pub use api::{ResultsResponse, WorkStatusResponse};
pub use client::{ClientError, QueueClient};
pub use config::{ServiceConfig, DEFAULT_PORT};
pub use device::{CapabilityMismatch, DeviceDescriptor, DeviceKind, GateSet, QueuePolicy};
pub use model::{JobRecord, JobStatus, Priority};
pub use scheduler::{SchedError, Scheduler};
pub use service::{serve, Service, ServiceError, ServiceHandle};
pub use store::{JobFilter, JobStore, NewJob, Payload, StoreError, StoreOptions};

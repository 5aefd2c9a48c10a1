//! Service assembly: store, scheduler, devices and the HTTP listener.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use conqure_core::SimConfig;
use thiserror::Error;
use tokio::sync::oneshot;
use tracing::{info, warn};

use crate::api::{router, AppState};
use crate::config::ServiceConfig;
use crate::scheduler::{SchedError, Scheduler};
use crate::store::{JobStore, StoreError, StoreOptions};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Scheduler(#[from] SchedError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// A ready-to-serve instance: store opened, interrupted jobs re-queued,
/// devices registered with running workers.
pub struct Service {
    pub scheduler: Arc<Scheduler>,
    config: ServiceConfig,
}

impl Service {
    pub fn build(config: ServiceConfig) -> Result<Self, ServiceError> {
        let store = Arc::new(JobStore::open_with(&config.store_path, StoreOptions { sync: config.sync })?);
        let requeued = store.requeue_interrupted()?;
        if !requeued.is_empty() {
            info!(count = requeued.len(), "re-queued jobs interrupted by the previous shutdown");
        }
        let sim = SimConfig { max_qubits: config.max_qubits, ..SimConfig::default() };
        let scheduler = Scheduler::new(Arc::clone(&store), sim);
        for descriptor in config.descriptors() {
            scheduler.register_device(descriptor)?;
        }
        for job in store.queued() {
            if let Err(e) = scheduler.enqueue(&job.job_id) {
                warn!(job = %job.job_id, "stored job not re-admitted: {e}");
            }
        }
        Ok(Service { scheduler, config })
    }

    pub fn router(&self) -> axum::Router {
        router(AppState {
            scheduler: Arc::clone(&self.scheduler),
            auth_token: self.config.auth_token.as_deref().map(Arc::from),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    async fn bind(&self) -> Result<tokio::net::TcpListener, ServiceError> {
        let addr = format!("{}:{}", self.config.bind, self.config.port);
        tokio::net::TcpListener::bind(&addr).await.map_err(|source| ServiceError::Bind { addr, source })
    }
}

/// Runs the service until SIGTERM or Ctrl-C. Jobs running at that moment
/// stay RUNNING in the store and are re-queued by the next start.
pub fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let service = Service::build(config)?;
        let listener = service.bind().await?;
        info!(addr = %listener.local_addr()?, devices = service.scheduler.devices().len(), "listening");
        axum::serve(listener, service.router()).with_graceful_shutdown(shutdown_signal()).await?;
        info!("shutting down");
        service.scheduler.shutdown();
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

/// An in-process service on its own runtime thread, for tests and
/// embedding. Port 0 picks a free port.
pub struct ServiceHandle {
    addr: SocketAddr,
    scheduler: Arc<Scheduler>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn spawn(config: ServiceConfig) -> Result<Self, ServiceError> {
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let service = Service::build(config)?;
        let listener = runtime.block_on(service.bind())?;
        let addr = listener.local_addr()?;
        let scheduler = Arc::clone(&service.scheduler);
        let app = service.router();
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("conqure-http".into()).spawn(move || {
            runtime.block_on(async move {
                let shutdown = async {
                    let _ = stopped.await;
                };
                if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
                    warn!("server stopped: {e}");
                }
            });
        })?;
        Ok(ServiceHandle { addr, scheduler, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn scheduler(&self) -> &Arc<Scheduler> {
        &self.scheduler
    }

    /// Stops the listener and the workers, waiting for in-flight jobs.
    pub fn shutdown(mut self) {
        self.stop_inner(true);
    }

    fn stop_inner(&mut self, join_workers: bool) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        self.scheduler.shutdown();
        if join_workers {
            self.scheduler.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop_inner(false);
    }
}

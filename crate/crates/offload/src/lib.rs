//! Offloading quantum tasks from a classical host to QPU executors, and a
//! max-cut VQE driver built on it.
//!
//! A [`QuantumTask`] collects gate calls and mapped-in parameter arrays.
//! An [`Executor`] runs the finalized document: in-process, through a
//! `conqure-exec` child process speaking one JSON line each way, or via the
//! queue service. [`run_multi_offload`] spreads tasks over a [`QpuPool`]
//! with one host thread per QPU.

pub mod executor;
pub mod message;
pub mod multi;
pub mod task;
pub mod vqe;

pub use executor::{
    document_seed, serve_pipe, Executor, LocalExecutor, OffloadError, PipeExecutor, QpuPool, QueueExecutor,
};
pub use message::{parse_map_from, parse_map_to, serialize_map_to, Direction, MessageError, OffloadMessage};
pub use multi::run_multi_offload;
pub use task::QuantumTask;
pub use vqe::{
    brute_force_maxcut, exact_expected_cut, fixture_graph, maxcut_cost, run_parallel_vqe, run_vqe_instance,
    run_vqe_instance_on, ConvergenceTrace, Graph, IterationRecord, Optimizer, ParallelVqeReport, Spsa, SpsaParams,
    VqeError, VqeFailure, VqeRunConfig,
};

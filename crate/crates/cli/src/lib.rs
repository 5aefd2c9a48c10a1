//! Library half of the `conqure` command: exit codes, the latency bench and
//! the VQE demo driver. `main.rs` holds argument parsing and dispatch.

pub mod bench;
pub mod demo;
pub mod exit;
pub mod plot;
pub mod stats;

pub use exit::CliError;

//! Circuit IR, the JSON workload document, and a seeded dense statevector
//! simulator that serves as the execution backend for every device.
//!
//! Bit order everywhere: qubit 0 is the rightmost character of a bitstring
//! and the least significant bit of a basis index.

pub mod builders;
pub mod circuit;
pub mod counts;
pub mod sim;
pub mod workload;

pub use builders::{build_ghz, build_vqe_ansatz, cx_replacement, AnsatzError};
pub use circuit::{Circuit, CircuitBuilder, CircuitError, GateKind, GateOp};
pub use counts::{bitstring, CountsError, CountsMap};
pub use sim::{exact_distribution, run_circuit, Kernel, SimConfig, SimError, Simulator, StateVector};
pub use workload::{parse_workload, serialize_workload, WorkloadDocument, WorkloadError};

//! The workload document: a versioned JSON wrapper around a [`Circuit`].
//!
//! Canonical form, single line, keys in this order:
//!
//! ```text
//! {"version":"1","shots":30,"num_qubits":2,"ops":[{"gate":"h","targets":[0]},{"gate":"cx","targets":[0,1]},{"gate":"measure_all"}],"metadata":{}}
//! ```
//!
//! `params` is omitted when empty and `targets` is omitted for
//! `measure_all`. Angles use shortest round-trip decimal printing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, GateKind, GateOp};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadDocument {
    pub version: String,
    pub circuit: Circuit,
    pub metadata: BTreeMap<String, String>,
}

impl WorkloadDocument {
    pub fn new(circuit: Circuit) -> Self {
        WorkloadDocument { version: FORMAT_VERSION.to_owned(), circuit, metadata: BTreeMap::new() }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn to_json(&self) -> String {
        serialize_workload(self)
    }
}

/// Embeds the canonical form as a JSON value (JSON serializers only).
impl Serialize for WorkloadDocument {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(serialize_workload(self)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WorkloadDocument {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Box::<RawValue>::deserialize(deserializer)?;
        parse_workload(raw.get().as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("invalid UTF-8 at byte {offset}")]
    Encoding { offset: usize },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid {path} at byte {offset}: {reason}")]
    Semantic { offset: usize, path: String, reason: String },
}

impl WorkloadError {
    fn semantic(offset: usize, path: impl Into<String>, reason: impl ToString) -> Self {
        WorkloadError::Semantic { offset, path: path.into(), reason: reason.to_string() }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc<'a> {
    #[serde(borrow)]
    version: &'a RawValue,
    #[serde(borrow)]
    shots: &'a RawValue,
    #[serde(borrow)]
    num_qubits: &'a RawValue,
    #[serde(borrow)]
    ops: Vec<&'a RawValue>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOp {
    gate: String,
    #[serde(default)]
    targets: Vec<usize>,
    #[serde(default)]
    params: Vec<f64>,
}

#[derive(Serialize)]
struct WireDoc<'a> {
    version: &'a str,
    shots: u64,
    num_qubits: usize,
    ops: Vec<WireOp<'a>>,
    metadata: &'a BTreeMap<String, String>,
}

#[derive(Serialize)]
struct WireOp<'a> {
    gate: &'static str,
    #[serde(skip_serializing_if = "<[usize]>::is_empty")]
    targets: &'a [usize],
    #[serde(skip_serializing_if = "<[f64]>::is_empty")]
    params: &'a [f64],
}

/// Parses and validates a workload document.
///
/// Syntax errors report line/column; semantic errors report the byte offset
/// of the offending value.
pub fn parse_workload(bytes: &[u8]) -> Result<WorkloadDocument, WorkloadError> {
    let text = std::str::from_utf8(bytes).map_err(|e| WorkloadError::Encoding { offset: e.valid_up_to() })?;
    let raw: RawDoc<'_> = serde_json::from_str(text).map_err(|e| WorkloadError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let offset_of = |v: &RawValue| v.get().as_ptr() as usize - text.as_ptr() as usize;

    let version: String = field(raw.version, "version", offset_of(raw.version))?;
    if version != FORMAT_VERSION {
        return Err(WorkloadError::semantic(
            offset_of(raw.version),
            "version",
            format!("unsupported version {version:?}, expected {FORMAT_VERSION:?}"),
        ));
    }
    let shots: u64 = field(raw.shots, "shots", offset_of(raw.shots))?;
    if shots == 0 {
        return Err(WorkloadError::semantic(offset_of(raw.shots), "shots", CircuitError::NoShots));
    }
    let num_qubits: usize = field(raw.num_qubits, "num_qubits", offset_of(raw.num_qubits))?;
    if num_qubits == 0 {
        return Err(WorkloadError::semantic(offset_of(raw.num_qubits), "num_qubits", CircuitError::NoQubits));
    }

    let mut ops = Vec::with_capacity(raw.ops.len());
    let last = raw.ops.len().saturating_sub(1);
    for (i, raw_op) in raw.ops.iter().enumerate() {
        let at = offset_of(raw_op);
        let path = format!("ops[{i}]");
        let op: RawOp = field(raw_op, &path, at)?;
        let kind: GateKind = op.gate.parse().map_err(|e| WorkloadError::semantic(at, &path, e))?;
        let op = GateOp::new(kind, op.targets, op.params)
            .and_then(|op| op.validate(num_qubits).map(|_| op))
            .map_err(|e| WorkloadError::semantic(at, &path, e))?;
        if kind == GateKind::MeasureAll && i != last {
            return Err(WorkloadError::semantic(at, &path, CircuitError::MeasureNotLast));
        }
        ops.push(op);
    }

    // Every invariant was checked above; this cannot fail.
    let circuit = Circuit::new(num_qubits, ops, shots).map_err(|e| WorkloadError::semantic(0, "circuit", e))?;
    Ok(WorkloadDocument { version, circuit, metadata: raw.metadata })
}

fn field<'de, T: Deserialize<'de>>(raw: &'de RawValue, path: &str, offset: usize) -> Result<T, WorkloadError> {
    serde_json::from_str(raw.get()).map_err(|e| {
        // Strip serde_json's own position suffix, which is relative to the fragment.
        let msg = e.to_string();
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_owned();
        WorkloadError::semantic(offset, path, msg)
    })
}

/// Canonical single-line text form of a document.
pub fn serialize_workload(doc: &WorkloadDocument) -> String {
    let wire = WireDoc {
        version: &doc.version,
        shots: doc.circuit.shots(),
        num_qubits: doc.circuit.num_qubits(),
        ops: doc
            .circuit
            .ops()
            .iter()
            .map(|op| WireOp { gate: op.kind().name(), targets: op.targets(), params: op.params() })
            .collect(),
        metadata: &doc.metadata,
    };
    serde_json::to_string(&wire).expect("workload documents always serialize")
}

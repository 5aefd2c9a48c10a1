//! Pipe messages. One line each way: the workload document to the device,
//! the counts object back.
//!
//! Mapped-in arrays ride in the document metadata as `map_to.<name>`, each
//! a JSON array of shortest round-trip decimal literals.

use std::collections::BTreeMap;

use conqure_core::{parse_workload, CountsError, CountsMap, WorkloadDocument, WorkloadError};
use thiserror::Error;

pub const MAP_TO_PREFIX: &str = "map_to.";
pub const SEED_KEY: &str = "seed";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MessageError {
    #[error("mapped value {name}[{index}] = {value} is not finite")]
    NonFinite { name: String, index: usize, value: f64 },
    #[error("mapped array `{name}`: {message}")]
    BadArray { name: String, message: String },
    #[error("malformed counts message: {0}")]
    Counts(#[from] CountsError),
    #[error("malformed task document: {0}")]
    Workload(#[from] WorkloadError),
    #[error("empty message")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToDevice,
    FromDevice,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OffloadMessage {
    ToDevice(WorkloadDocument),
    FromDevice(CountsMap),
}

impl OffloadMessage {
    pub fn direction(&self) -> Direction {
        match self {
            OffloadMessage::ToDevice(_) => Direction::ToDevice,
            OffloadMessage::FromDevice(_) => Direction::FromDevice,
        }
    }

    /// The message as one newline-terminated line.
    pub fn to_line(&self) -> String {
        let mut line = match self {
            OffloadMessage::ToDevice(doc) => doc.to_json(),
            OffloadMessage::FromDevice(counts) => counts.to_wire(),
        };
        line.push('\n');
        line
    }

    pub fn parse_to_device(line: &str) -> Result<Self, MessageError> {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            return Err(MessageError::Empty);
        }
        Ok(OffloadMessage::ToDevice(parse_workload(line.as_bytes())?))
    }
}

/// Metadata entries carrying the named arrays.
pub fn serialize_map_to(values: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, String>, MessageError> {
    values
        .iter()
        .map(|(name, arr)| {
            if let Some((index, &value)) = arr.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(MessageError::NonFinite { name: name.clone(), index, value });
            }
            let text = serde_json::to_string(arr).expect("finite floats serialize");
            Ok((format!("{MAP_TO_PREFIX}{name}"), text))
        })
        .collect()
}

/// Inverse of [`serialize_map_to`]; other metadata keys are ignored.
pub fn parse_map_to(metadata: &BTreeMap<String, String>) -> Result<BTreeMap<String, Vec<f64>>, MessageError> {
    metadata
        .iter()
        .filter_map(|(k, v)| k.strip_prefix(MAP_TO_PREFIX).map(|name| (name, v)))
        .map(|(name, text)| {
            serde_json::from_str::<Vec<f64>>(text)
                .map(|arr| (name.to_owned(), arr))
                .map_err(|e| MessageError::BadArray { name: name.to_owned(), message: e.to_string() })
        })
        .collect()
}

/// Parses a FROM_DEVICE line and checks it accounts for `shots`.
pub fn parse_map_from(message: &str, shots: u64) -> Result<CountsMap, MessageError> {
    if message.trim().is_empty() {
        return Err(MessageError::Empty);
    }
    let counts = CountsMap::from_wire(message)?;
    counts.check_shots(shots)?;
    Ok(counts)
}

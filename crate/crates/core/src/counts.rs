//! Measurement histograms and their JSON wire form.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CountsError {
    #[error("malformed counts JSON: {0}")]
    Json(String),
    #[error("counts map is empty")]
    Empty,
    #[error("bitstring {0:?} is not over {{0,1}}")]
    BadBitstring(String),
    #[error("bitstring {key:?} has length {got}, expected {expected}")]
    Width { key: String, expected: usize, got: usize },
    #[error("bitstring {0:?} has a zero count")]
    ZeroCount(String),
    #[error("counts sum to {got}, expected {expected} shots")]
    ShotMismatch { expected: u64, got: u64 },
}

/// Bitstring → occurrence count, for observed outcomes only.
///
/// Character `n-1-q` of a key is the outcome of qubit `q`, so qubit 0 is the
/// rightmost character. Lookups of unobserved bitstrings return 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsMap {
    num_bits: usize,
    entries: BTreeMap<String, u64>,
}

impl CountsMap {
    /// Builds from a dense histogram indexed by basis state.
    pub fn from_histogram(num_bits: usize, histogram: &[u64]) -> Self {
        debug_assert_eq!(histogram.len(), 1usize << num_bits);
        let entries =
            histogram.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (bitstring(i, num_bits), c)).collect();
        CountsMap { num_bits, entries }
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self, CountsError>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        let mut width = None;
        for (key, count) in entries {
            let key = key.into();
            if key.is_empty() || !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(CountsError::BadBitstring(key));
            }
            let expected = *width.get_or_insert(key.len());
            if key.len() != expected {
                return Err(CountsError::Width { got: key.len(), key, expected });
            }
            if count == 0 {
                return Err(CountsError::ZeroCount(key));
            }
            *map.entry(key).or_insert(0) += count;
        }
        let num_bits = width.ok_or(CountsError::Empty)?;
        Ok(CountsMap { num_bits, entries: map })
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn shots(&self) -> u64 {
        self.entries.values().sum()
    }

    /// Count for `bits`, 0 when it was never observed.
    pub fn get(&self, bits: &str) -> u64 {
        self.entries.get(bits).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Observed outcomes as `(basis index, count)`.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.entries.iter().map(|(k, &v)| (usize::from_str_radix(k, 2).expect("validated bitstring"), v))
    }

    pub fn check_shots(&self, expected: u64) -> Result<(), CountsError> {
        let got = self.shots();
        if got == expected {
            Ok(())
        } else {
            Err(CountsError::ShotMismatch { expected, got })
        }
    }

    /// Wire form: one JSON object, `", "` and `": "` separators, keys sorted.
    pub fn to_wire(&self) -> String {
        let mut out = Vec::with_capacity(self.entries.len() * 16);
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SpacedFormatter);
        self.entries.serialize(&mut ser).expect("in-memory write");
        String::from_utf8(out).expect("JSON is UTF-8")
    }

    /// Parses the wire form. Any key order and whitespace is accepted.
    pub fn from_wire(text: &str) -> Result<Self, CountsError> {
        let raw: BTreeMap<String, u64> =
            serde_json::from_str(text.trim()).map_err(|e| CountsError::Json(e.to_string()))?;
        CountsMap::from_entries(raw)
    }
}

/// Basis index → bitstring with qubit 0 rightmost.
pub fn bitstring(index: usize, num_bits: usize) -> String {
    (0..num_bits).rev().map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

impl Serialize for CountsMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CountsMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, u64>::deserialize(deserializer)?;
        CountsMap::from_entries(raw).map_err(serde::de::Error::custom)
    }
}

/// Compact JSON with a space after `,` and `:`.
struct SpacedFormatter;

impl serde_json::ser::Formatter for SpacedFormatter {
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b": ")
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }
}

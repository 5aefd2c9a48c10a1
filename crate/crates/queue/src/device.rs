use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use conqure_core::{Circuit, GateKind};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeviceKind {
    #[default]
    Simulator,
    HardwareStub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QueuePolicy {
    /// Highest priority first, FIFO within a level.
    #[default]
    PriorityFifo,
    /// Within the top priority level, prefer jobs with the qubit count the
    /// device last ran.
    QubitAffinity,
}

impl FromStr for QueuePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "PRIORITY_FIFO" => Ok(QueuePolicy::PriorityFifo),
            "QUBIT_AFFINITY" => Ok(QueuePolicy::QubitAffinity),
            _ => Err(format!("unknown queue policy `{s}`")),
        }
    }
}

/// Gate set serialized as lowercase gate names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateSet(pub BTreeSet<GateKind>);

impl GateSet {
    pub fn all() -> Self {
        GateSet(GateKind::ALL.iter().copied().filter(|k| *k != GateKind::MeasureAll).collect())
    }

    pub fn single_qubit() -> Self {
        GateSet([GateKind::H, GateKind::X, GateKind::Rx, GateKind::Ry, GateKind::Rz].into())
    }

    pub fn contains(&self, kind: GateKind) -> bool {
        kind == GateKind::MeasureAll || self.0.contains(&kind)
    }
}

impl Default for GateSet {
    fn default() -> Self {
        GateSet::all()
    }
}

impl Serialize for GateSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(|k| k.name()))
    }
}

impl<'de> Deserialize<'de> for GateSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        names
            .iter()
            .map(|n| n.parse::<GateKind>().map_err(serde::de::Error::custom))
            .collect::<Result<_, _>>()
            .map(GateSet)
    }
}

fn one() -> u32 {
    1
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub device_id: String,
    #[serde(default)]
    pub kind: DeviceKind,
    pub num_qubits: usize,
    #[serde(default)]
    pub supported_gates: GateSet,
    #[serde(default = "one")]
    pub slots: u32,
    #[serde(default)]
    pub policy: QueuePolicy,
    /// Emulated device occupancy per job in milliseconds: a job holds its
    /// slot for at least this long. Models QPU execution time that is not
    /// spent on the host CPU.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub exec_time_ms: u64,
}

impl DeviceDescriptor {
    pub fn simulator(device_id: impl Into<String>, num_qubits: usize) -> Self {
        DeviceDescriptor {
            device_id: device_id.into(),
            kind: DeviceKind::Simulator,
            num_qubits,
            supported_gates: GateSet::all(),
            slots: 1,
            policy: QueuePolicy::PriorityFifo,
            exec_time_ms: 0,
        }
    }

    pub fn hardware_stub(device_id: impl Into<String>, num_qubits: usize, gates: GateSet) -> Self {
        DeviceDescriptor {
            kind: DeviceKind::HardwareStub,
            supported_gates: gates,
            ..Self::simulator(device_id, num_qubits)
        }
    }

    pub fn with_policy(mut self, policy: QueuePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.device_id.trim().is_empty() {
            return Err("device_id must be nonempty".into());
        }
        if self.slots == 0 {
            return Err(format!("device `{}`: slots must be at least 1", self.device_id));
        }
        if self.num_qubits == 0 {
            return Err(format!("device `{}`: num_qubits must be at least 1", self.device_id));
        }
        Ok(())
    }

    /// Admission check: width and gate set.
    pub fn admits(&self, circuit: &Circuit) -> Result<(), CapabilityMismatch> {
        if circuit.num_qubits() > self.num_qubits {
            return Err(CapabilityMismatch::Capacity { needed: circuit.num_qubits(), available: self.num_qubits });
        }
        let missing: Vec<GateKind> =
            circuit.gate_kinds().into_iter().filter(|k| !self.supported_gates.contains(*k)).collect();
        if !missing.is_empty() {
            return Err(CapabilityMismatch::Gates(missing));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CapabilityMismatch {
    Capacity { needed: usize, available: usize },
    Gates(Vec<GateKind>),
}

impl fmt::Display for CapabilityMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapabilityMismatch::Capacity { needed, available } => {
                write!(f, "circuit needs {needed} qubits but the device has {available}")
            }
            CapabilityMismatch::Gates(gates) => {
                let names: Vec<_> = gates.iter().map(|g| g.name()).collect();
                write!(f, "device does not support gate(s): {}", names.join(", "))
            }
        }
    }
}

//! Service startup configuration (TOML or JSON).
//!
//! ```toml
//! port = 8042
//! store_path = "conqure-jobs.log"
//! default_policy = "PRIORITY_FIFO"
//!
//! [[devices]]
//! id = "sim0"
//! kind = "SIMULATOR"
//! num_qubits = 24
//! gates = ["h", "x", "rx", "ry", "rz", "cx"]
//! slots = 1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceDescriptor, DeviceKind, GateSet, QueuePolicy};

pub const DEFAULT_PORT: u16 = 8042;
pub const PORT_ENV: &str = "CONQURE_PORT";
pub const STORE_ENV: &str = "CONQURE_STORE";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(alias = "device_id")]
    pub id: String,
    #[serde(default)]
    pub kind: DeviceKind,
    pub num_qubits: usize,
    #[serde(default, alias = "supported_gates")]
    pub gates: GateSet,
    #[serde(default = "one")]
    pub slots: u32,
    /// Falls back to the service-wide `default_policy`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<QueuePolicy>,
    #[serde(default)]
    pub exec_time_ms: u64,
}

fn one() -> u32 {
    1
}

impl DeviceConfig {
    pub fn descriptor(&self, default_policy: QueuePolicy) -> DeviceDescriptor {
        DeviceDescriptor {
            device_id: self.id.clone(),
            kind: self.kind,
            num_qubits: self.num_qubits,
            supported_gates: self.gates.clone(),
            slots: self.slots,
            policy: self.policy.unwrap_or(default_policy),
            exec_time_ms: self.exec_time_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_store", alias = "store")]
    pub store_path: PathBuf,
    #[serde(default)]
    pub default_policy: QueuePolicy,
    /// fsync every store write.
    #[serde(default = "yes")]
    pub sync: bool,
    /// Simulator qubit guard applied by workers.
    #[serde(default = "default_max_qubits")]
    pub max_qubits: usize,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_token: Option<String>,
    #[serde(default = "default_devices")]
    pub devices: Vec<DeviceConfig>,
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_store() -> PathBuf {
    PathBuf::from("conqure-jobs.log")
}

fn yes() -> bool {
    true
}

fn default_max_qubits() -> usize {
    conqure_core::sim::DEFAULT_MAX_QUBITS
}

fn default_devices() -> Vec<DeviceConfig> {
    vec![DeviceConfig {
        id: "sim0".into(),
        kind: DeviceKind::Simulator,
        num_qubits: 24,
        gates: GateSet::all(),
        slots: 1,
        policy: None,
        exec_time_ms: 0,
    }]
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: default_port(),
            bind: default_bind(),
            store_path: default_store(),
            default_policy: QueuePolicy::PriorityFifo,
            sync: true,
            max_qubits: default_max_qubits(),
            auth_token: None,
            devices: default_devices(),
        }
    }
}

impl ServiceConfig {
    /// Reads a config file; `.json` files are JSON, everything else TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config = if is_json { Self::from_json(&text) } else { Self::from_toml(&text) };
        config.map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.into(), message },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `CONQURE_PORT` and `CONQURE_STORE`.
    pub fn apply_env(mut self) -> Result<Self, ConfigError> {
        self.apply_overrides(std::env::var(PORT_ENV).ok().as_deref(), std::env::var_os(STORE_ENV).map(PathBuf::from))?;
        Ok(self)
    }

    fn apply_overrides(&mut self, port: Option<&str>, store: Option<PathBuf>) -> Result<(), ConfigError> {
        if let Some(p) = port {
            self.port =
                p.trim().parse().map_err(|_| ConfigError::Invalid(format!("{PORT_ENV}=`{p}` is not a port")))?;
        }
        if let Some(s) = store {
            self.store_path = s;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.devices {
            d.descriptor(self.default_policy).validate().map_err(ConfigError::Invalid)?;
            if !seen.insert(d.id.as_str()) {
                return Err(ConfigError::Invalid(format!("duplicate device id `{}`", d.id)));
            }
        }
        if self.max_qubits == 0 {
            return Err(ConfigError::Invalid("max_qubits must be at least 1".into()));
        }
        Ok(())
    }

    pub fn descriptors(&self) -> Vec<DeviceDescriptor> {
        self.devices.iter().map(|d| d.descriptor(self.default_policy)).collect()
    }

    /// `count` identical simulators named `sim0`, `sim1`, ...
    pub fn with_simulators(mut self, count: usize, num_qubits: usize) -> Self {
        self.devices = (0..count)
            .map(|i| DeviceConfig { id: format!("sim{i}"), num_qubits, ..default_devices().remove(0) })
            .collect();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use conqure_core::GateKind;

    #[test]
    fn toml_example_parses() {
        let cfg = ServiceConfig::from_toml(
            r#"
            port = 9000
            store_path = "/tmp/x.log"
            default_policy = "QUBIT_AFFINITY"

            [[devices]]
            id = "sim0"
            kind = "SIMULATOR"
            num_qubits = 24
            slots = 2

            [[devices]]
            id = "ion"
            kind = "HARDWARE_STUB"
            num_qubits = 6
            gates = ["rx", "ry"]
            policy = "PRIORITY_FIFO"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.port, 9000);
        let d = cfg.descriptors();
        assert_eq!(d[0].policy, QueuePolicy::QubitAffinity);
        assert_eq!(d[0].slots, 2);
        assert_eq!(d[1].policy, QueuePolicy::PriorityFifo);
        assert!(!d[1].supported_gates.contains(GateKind::Cx));
    }

    #[test]
    fn json_and_defaults() {
        let cfg = ServiceConfig::from_json(r#"{"devices":[{"device_id":"a","num_qubits":4}]}"#).unwrap();
        assert_eq!(cfg.port, DEFAULT_PORT);
        assert_eq!(cfg.devices[0].slots, 1);
        assert_eq!(ServiceConfig::from_json("{}").unwrap().devices[0].id, "sim0");
        let empty = ServiceConfig::from_json(r#"{"devices":[]}"#).unwrap();
        assert!(empty.devices.is_empty());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ServiceConfig::from_toml("port = \"x\"").is_err());
        assert!(ServiceConfig::from_toml("colour = 1").is_err());
        let dup = r#"{"devices":[{"id":"a","num_qubits":4},{"id":"a","num_qubits":4}]}"#;
        assert!(matches!(ServiceConfig::from_json(dup), Err(ConfigError::Invalid(_))));
        let zero = r#"{"devices":[{"id":"a","num_qubits":4,"slots":0}]}"#;
        assert!(ServiceConfig::from_json(zero).is_err());
    }

    #[test]
    fn overrides() {
        let mut cfg = ServiceConfig::default();
        cfg.apply_overrides(Some("1234"), Some("/var/jobs.log".into())).unwrap();
        assert_eq!(cfg.port, 1234);
        assert_eq!(cfg.store_path, PathBuf::from("/var/jobs.log"));
        assert!(cfg.apply_overrides(Some("huge"), None).is_err());
    }

    #[test]
    fn six_simulators() {
        let cfg = ServiceConfig::default().with_simulators(6, 10);
        let ids: Vec<_> = cfg.devices.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["sim0", "sim1", "sim2", "sim3", "sim4", "sim5"]);
        cfg.validate().unwrap();
    }
}

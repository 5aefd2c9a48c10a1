//! Host-side circuit wrapper: gate calls accumulate into a circuit, mapped
//! arrays travel with it, and `execute` fills the frequencies slot.

use std::collections::BTreeMap;

use conqure_core::{CircuitBuilder, CircuitError, CountsMap, WorkloadDocument};

use crate::executor::{Executor, OffloadError};
use crate::message::{serialize_map_to, SEED_KEY};

#[derive(Debug, Clone)]
pub struct QuantumTask {
    device_index: usize,
    builder: CircuitBuilder,
    shots: u64,
    seed: u64,
    mapped_in: BTreeMap<String, Vec<f64>>,
    frequencies: Option<CountsMap>,
}

impl QuantumTask {
    pub fn new(num_qubits: usize, shots: u64) -> Self {
        QuantumTask {
            device_index: 0,
            builder: CircuitBuilder::new(num_qubits),
            shots,
            seed: 0,
            mapped_in: BTreeMap::new(),
            frequencies: None,
        }
    }

    pub fn on_device(mut self, device_index: usize) -> Self {
        self.device_index = device_index;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn device_index(&self) -> usize {
        self.device_index
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Attaches a named parameter array shipped with the task.
    pub fn map_to(&mut self, name: impl Into<String>, values: &[f64]) -> &mut Self {
        self.mapped_in.insert(name.into(), values.to_vec());
        self
    }

    pub fn mapped_in(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.mapped_in
    }

    pub fn h(&mut self, q: usize) -> Result<&mut Self, CircuitError> {
        self.builder.h(q)?;
        Ok(self)
    }

    pub fn x(&mut self, q: usize) -> Result<&mut Self, CircuitError> {
        self.builder.x(q)?;
        Ok(self)
    }

    pub fn rx(&mut self, theta: f64, q: usize) -> Result<&mut Self, CircuitError> {
        self.builder.rx(theta, q)?;
        Ok(self)
    }

    pub fn ry(&mut self, theta: f64, q: usize) -> Result<&mut Self, CircuitError> {
        self.builder.ry(theta, q)?;
        Ok(self)
    }

    pub fn rz(&mut self, theta: f64, q: usize) -> Result<&mut Self, CircuitError> {
        self.builder.rz(theta, q)?;
        Ok(self)
    }

    pub fn cx(&mut self, control: usize, target: usize) -> Result<&mut Self, CircuitError> {
        self.builder.cx(control, target)?;
        Ok(self)
    }

    /// Appends `measure_all` and freezes the gate list.
    pub fn measure(&mut self) -> Result<&mut Self, CircuitError> {
        self.builder.measure_all()?;
        Ok(self)
    }

    pub fn num_ops(&self) -> usize {
        self.builder.ops().len()
    }

    /// The TO_DEVICE document: circuit, mapped arrays and seed.
    pub fn document(&self) -> Result<WorkloadDocument, OffloadError> {
        if !self.builder.is_finalized() {
            return Err(OffloadError::Task("task is not finalized; call measure() first".into()));
        }
        let circuit = self.builder.build(self.shots).map_err(|e| OffloadError::Task(e.to_string()))?;
        let mut doc = WorkloadDocument::new(circuit).with_metadata(SEED_KEY, self.seed.to_string());
        doc.metadata.extend(serialize_map_to(&self.mapped_in)?);
        Ok(doc)
    }

    pub fn execute(&mut self, executor: &dyn Executor) -> Result<&CountsMap, OffloadError> {
        let doc = self.document()?;
        let counts = executor.execute(&doc)?;
        Ok(self.frequencies.insert(counts))
    }

    pub(crate) fn set_frequencies(&mut self, counts: CountsMap) {
        self.frequencies = Some(counts);
    }

    /// Counts of the last execution.
    pub fn frequencies(&self) -> Option<&CountsMap> {
        self.frequencies.as_ref()
    }
}

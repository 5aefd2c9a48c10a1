//! Dense statevector simulator with seeded shot sampling.

pub mod kernels;
pub mod sampling;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{Circuit, GateKind, GateOp};
use crate::counts::{bitstring, CountsMap};
pub use kernels::Kernel;
use kernels::Mat2;
pub use sampling::RNG_ALGORITHM;

pub const DEFAULT_MAX_QUBITS: usize = 24;

/// Probabilities below this are left out of [`Simulator::exact_distribution`].
pub const DISTRIBUTION_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("circuit needs {needed} qubits, simulator allows at most {max}")]
    CapacityExceeded { needed: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub max_qubits: usize,
    pub kernel: Kernel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 0, max_qubits: DEFAULT_MAX_QUBITS, kernel: Kernel::Auto }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        SimConfig { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies one gate in place. `measure_all` is a no-op here; sampling
    /// happens in [`Simulator::run`].
    ///
    /// # Panics
    ///
    /// If the op addresses a qubit outside the register.
    pub fn apply(&mut self, op: &GateOp, kernel: Kernel) {
        assert!(
            op.targets().iter().all(|&q| q < self.num_qubits),
            "{op} is out of range for {} qubits",
            self.num_qubits
        );
        let par = kernel.use_parallel(self.num_qubits);
        match op.kind() {
            GateKind::MeasureAll => {}
            GateKind::Cx => kernels::apply_cx(&mut self.amps, op.targets()[0], op.targets()[1], par),
            kind => {
                let m = single_qubit_matrix(kind, op.params());
                kernels::apply_single(&mut self.amps, op.targets()[0], &m, par);
            }
        }
    }

    pub fn probabilities(&self, kernel: Kernel) -> Vec<f64> {
        kernels::probabilities(&self.amps, kernel.use_parallel(self.num_qubits))
    }
}

/// Consumes `state` and returns it with `op` applied.
pub fn apply_gate(mut state: StateVector, op: &GateOp) -> StateVector {
    state.apply(op, Kernel::Auto);
    state
}

pub fn single_qubit_matrix(kind: GateKind, params: &[f64]) -> Mat2 {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match kind {
        GateKind::H => [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
        GateKind::X => [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        GateKind::Rx => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            [c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]
        }
        GateKind::Ry => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            [c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
        }
        GateKind::Rz => {
            let (s, co) = (params[0] / 2.0).sin_cos();
            [c(co, -s), c(0.0, 0.0), c(0.0, 0.0), c(co, s)]
        }
        GateKind::Cx | GateKind::MeasureAll => panic!("{kind} is not a single-qubit unitary"),
    }
}

/// A simulator bound to one configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Simulator {
    config: SimConfig,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        Simulator { config }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    fn check(&self, circuit: &Circuit) -> Result<(), SimError> {
        if circuit.num_qubits() > self.config.max_qubits {
            return Err(SimError::CapacityExceeded { needed: circuit.num_qubits(), max: self.config.max_qubits });
        }
        Ok(())
    }

    pub fn final_state(&self, circuit: &Circuit) -> Result<StateVector, SimError> {
        self.check(circuit)?;
        let mut state = StateVector::zero(circuit.num_qubits());
        for op in circuit.unitary_ops() {
            state.apply(op, self.config.kernel);
        }
        Ok(state)
    }

    /// |amplitude|² indexed by basis state.
    pub fn probabilities(&self, circuit: &Circuit) -> Result<Vec<f64>, SimError> {
        Ok(self.final_state(circuit)?.probabilities(self.config.kernel))
    }

    pub fn exact_distribution(&self, circuit: &Circuit) -> Result<BTreeMap<String, f64>, SimError> {
        let n = circuit.num_qubits();
        Ok(self
            .probabilities(circuit)?
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p >= DISTRIBUTION_FLOOR)
            .map(|(i, p)| (bitstring(i, n), p))
            .collect())
    }

    /// Runs the circuit and samples `circuit.shots()` outcomes with the
    /// configured seed.
    pub fn run(&self, circuit: &Circuit) -> Result<CountsMap, SimError> {
        let n = circuit.num_qubits();
        let state = self.final_state(circuit)?;
        let par = self.config.kernel.use_parallel(n);
        let probs = state.probabilities(self.config.kernel);
        let sampled = sampling::sample_counts(&probs, circuit.shots(), self.config.seed, par);
        let counts = CountsMap::from_entries(sampled.into_iter().map(|(i, c)| (bitstring(i, n), c)))
            .expect("sampler emits valid bitstrings");
        debug_assert_eq!(counts.shots(), circuit.shots());
        Ok(counts)
    }
}

pub fn run_circuit(circuit: &Circuit, config: SimConfig) -> Result<CountsMap, SimError> {
    Simulator::new(config).run(circuit)
}

pub fn exact_distribution(circuit: &Circuit) -> Result<BTreeMap<String, f64>, SimError> {
    Simulator::default().exact_distribution(circuit)
}

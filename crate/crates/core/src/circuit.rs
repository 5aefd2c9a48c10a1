//! Gate-level circuit representation.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Gate vocabulary understood by the workload format and the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateKind {
    H,
    X,
    Rx,
    Ry,
    Rz,
    Cx,
    MeasureAll,
}

impl GateKind {
    pub const ALL: [GateKind; 7] =
        [GateKind::H, GateKind::X, GateKind::Rx, GateKind::Ry, GateKind::Rz, GateKind::Cx, GateKind::MeasureAll];

    /// Lowercase name used on the wire.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Cx => "cx",
            GateKind::MeasureAll => "measure_all",
        }
    }

    pub fn target_arity(self) -> usize {
        match self {
            GateKind::MeasureAll => 0,
            GateKind::Cx => 2,
            _ => 1,
        }
    }

    pub fn param_arity(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown gate `{0}`")]
pub struct UnknownGate(pub String);

impl FromStr for GateKind {
    type Err = UnknownGate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GateKind::ALL.iter().copied().find(|k| k.name() == s).ok_or_else(|| UnknownGate(s.to_owned()))
    }
}

/// Reasons a gate or circuit fails validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("`{gate}` expects {expected} target(s), got {got}")]
    TargetArity { gate: GateKind, expected: usize, got: usize },
    #[error("`{gate}` expects {expected} parameter(s), got {got}")]
    ParamArity { gate: GateKind, expected: usize, got: usize },
    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("angle {0} is not finite")]
    NonFiniteAngle(f64),
    #[error("measure_all must be the final operation")]
    MeasureNotLast,
    #[error("circuit must have at least one qubit")]
    NoQubits,
    #[error("shots must be at least 1")]
    NoShots,
    #[error("gate added after measure_all")]
    Finalized,
}

/// One gate application. Construct through the typed helpers or
/// [`GateOp::new`], which checks arity.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    kind: GateKind,
    targets: Vec<usize>,
    params: Vec<f64>,
}

impl GateOp {
    /// Builds an op, checking target/parameter arity, distinct targets and
    /// finite angles. Range against a circuit width is checked separately.
    pub fn new(kind: GateKind, targets: Vec<usize>, params: Vec<f64>) -> Result<Self, CircuitError> {
        if targets.len() != kind.target_arity() {
            return Err(CircuitError::TargetArity { gate: kind, expected: kind.target_arity(), got: targets.len() });
        }
        if params.len() != kind.param_arity() {
            return Err(CircuitError::ParamArity { gate: kind, expected: kind.param_arity(), got: params.len() });
        }
        if let [a, b] = targets[..] {
            if a == b {
                return Err(CircuitError::DuplicateTarget(a));
            }
        }
        if let Some(&bad) = params.iter().find(|p| !p.is_finite()) {
            return Err(CircuitError::NonFiniteAngle(bad));
        }
        Ok(GateOp { kind, targets, params })
    }

    pub fn h(q: usize) -> Self {
        GateOp { kind: GateKind::H, targets: vec![q], params: vec![] }
    }

    pub fn x(q: usize) -> Self {
        GateOp { kind: GateKind::X, targets: vec![q], params: vec![] }
    }

    pub fn rx(theta: f64, q: usize) -> Self {
        GateOp { kind: GateKind::Rx, targets: vec![q], params: vec![theta] }
    }

    pub fn ry(theta: f64, q: usize) -> Self {
        GateOp { kind: GateKind::Ry, targets: vec![q], params: vec![theta] }
    }

    pub fn rz(theta: f64, q: usize) -> Self {
        GateOp { kind: GateKind::Rz, targets: vec![q], params: vec![theta] }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        GateOp { kind: GateKind::Cx, targets: vec![control, target], params: vec![] }
    }

    pub fn measure_all() -> Self {
        GateOp { kind: GateKind::MeasureAll, targets: vec![], params: vec![] }
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Full validation against a circuit width, including the checks done
    /// by [`GateOp::new`] (typed constructors skip those).
    pub fn validate(&self, num_qubits: usize) -> Result<(), CircuitError> {
        GateOp::new(self.kind, self.targets.clone(), self.params.clone())?;
        if let Some(&q) = self.targets.iter().find(|&&q| q >= num_qubits) {
            return Err(CircuitError::QubitOutOfRange { qubit: q, num_qubits });
        }
        Ok(())
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        let mut first = true;
        for p in &self.params {
            write!(f, "{p}")?;
            first = false;
        }
        for t in &self.targets {
            if !first {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
            first = false;
        }
        f.write_str(")")
    }
}

/// A validated circuit: width, ordered ops and the shot count to sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    ops: Vec<GateOp>,
    shots: u64,
}

impl Circuit {
    pub fn new(num_qubits: usize, ops: Vec<GateOp>, shots: u64) -> Result<Self, CircuitError> {
        if num_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        if shots == 0 {
            return Err(CircuitError::NoShots);
        }
        let last = ops.len().saturating_sub(1);
        for (i, op) in ops.iter().enumerate() {
            op.validate(num_qubits)?;
            if op.kind == GateKind::MeasureAll && i != last {
                return Err(CircuitError::MeasureNotLast);
            }
        }
        Ok(Circuit { num_qubits, ops, shots })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn with_shots(mut self, shots: u64) -> Result<Self, CircuitError> {
        if shots == 0 {
            return Err(CircuitError::NoShots);
        }
        self.shots = shots;
        Ok(self)
    }

    pub fn is_measured(&self) -> bool {
        self.ops.last().is_some_and(|op| op.kind == GateKind::MeasureAll)
    }

    /// Ops that act on the state (everything except the terminal measurement).
    pub fn unitary_ops(&self) -> impl Iterator<Item = &GateOp> {
        self.ops.iter().filter(|op| op.kind != GateKind::MeasureAll)
    }

    /// Distinct gate kinds used, excluding `measure_all`.
    pub fn gate_kinds(&self) -> std::collections::BTreeSet<GateKind> {
        self.unitary_ops().map(GateOp::kind).collect()
    }
}

/// Incremental construction with the same checks as [`Circuit::new`],
/// reported at the call that breaks them.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    num_qubits: usize,
    ops: Vec<GateOp>,
}

impl CircuitBuilder {
    pub fn new(num_qubits: usize) -> Self {
        CircuitBuilder { num_qubits, ops: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn is_finalized(&self) -> bool {
        self.ops.last().is_some_and(|op| op.kind == GateKind::MeasureAll)
    }

    pub fn push(&mut self, op: GateOp) -> Result<&mut Self, CircuitError> {
        if self.is_finalized() {
            return Err(CircuitError::Finalized);
        }
        op.validate(self.num_qubits)?;
        self.ops.push(op);
        Ok(self)
    }

    pub fn h(&mut self, q: usize) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::h(q))
    }

    pub fn x(&mut self, q: usize) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::x(q))
    }

    pub fn rx(&mut self, theta: f64, q: usize) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::rx(theta, q))
    }

    pub fn ry(&mut self, theta: f64, q: usize) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::ry(theta, q))
    }

    pub fn rz(&mut self, theta: f64, q: usize) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::rz(theta, q))
    }

    pub fn cx(&mut self, control: usize, target: usize) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::cx(control, target))
    }

    pub fn measure_all(&mut self) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::measure_all())
    }

    pub fn build(&self, shots: u64) -> Result<Circuit, CircuitError> {
        Circuit::new(self.num_qubits, self.ops.clone(), shots)
    }
}

//! Canonical circuit constructors.

use thiserror::Error;

use crate::circuit::{Circuit, GateKind, GateOp};

/// Angles of a generated 4-qubit ansatz task, first RY layer then second.
/// The second layer reuses the first-layer angle on qubit 0.
pub const SAMPLE_ANSATZ_ANGLES: [f64; 8] = [
    2.858849, 1.445133, 2.136283, 2.293363, //
    2.858849, 1.445133, 2.136283, 2.293363,
];

/// GHZ preparation: `H(0)`, a CX chain down the register, then `measure_all`.
///
/// # Panics
///
/// If `num_qubits` or `shots` is zero.
pub fn build_ghz(num_qubits: usize, shots: u64) -> Circuit {
    assert!(num_qubits >= 1, "GHZ needs at least one qubit");
    let mut ops = Vec::with_capacity(num_qubits + 1);
    ops.push(GateOp::h(0));
    ops.extend((0..num_qubits - 1).map(|q| GateOp::cx(q, q + 1)));
    ops.push(GateOp::measure_all());
    Circuit::new(num_qubits, ops, shots).expect("GHZ construction is valid")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnsatzError {
    #[error("ansatz on {num_qubits} qubits needs {expected} angles, got {got}")]
    AngleArity { num_qubits: usize, expected: usize, got: usize },
    #[error("angle {0} is not finite")]
    NonFinite(f64),
    #[error("ansatz needs at least one qubit and one shot")]
    Empty,
}

/// Hardware-efficient ansatz: RY layer, CX chain `(0,1)..(n-2,n-1)`,
/// second RY layer, `measure_all`. `angles[..n]` feed the first layer and
/// `angles[n..]` the second.
pub fn build_vqe_ansatz(num_qubits: usize, angles: &[f64], shots: u64) -> Result<Circuit, AnsatzError> {
    if num_qubits == 0 || shots == 0 {
        return Err(AnsatzError::Empty);
    }
    if angles.len() != 2 * num_qubits {
        return Err(AnsatzError::AngleArity { num_qubits, expected: 2 * num_qubits, got: angles.len() });
    }
    if let Some(&bad) = angles.iter().find(|a| !a.is_finite()) {
        return Err(AnsatzError::NonFinite(bad));
    }
    let (first, second) = angles.split_at(num_qubits);
    let mut ops = Vec::with_capacity(3 * num_qubits);
    ops.extend(first.iter().enumerate().map(|(q, &a)| GateOp::ry(a, q)));
    ops.extend((0..num_qubits - 1).map(|q| GateOp::cx(q, q + 1)));
    ops.extend(second.iter().enumerate().map(|(q, &a)| GateOp::ry(a, q)));
    ops.push(GateOp::measure_all());
    Ok(Circuit::new(num_qubits, ops, shots).expect("ansatz construction is valid"))
}

/// Rewrites every CX into a same-duration sequence of single-qubit gates:
/// `RY, RX` on the target, `H, H, X, X` across both qubits, then `RY, RX`
/// on the target again. The result is a different unitary; it exists so
/// circuits can run on devices without two-qubit gates.
pub fn cx_replacement(circuit: &Circuit, angle: f64) -> Circuit {
    let mut ops = Vec::with_capacity(circuit.ops().len());
    for op in circuit.ops() {
        if op.kind() == GateKind::Cx {
            let (c, t) = (op.targets()[0], op.targets()[1]);
            ops.extend([
                GateOp::ry(angle, t),
                GateOp::rx(angle, t),
                GateOp::h(c),
                GateOp::h(t),
                GateOp::x(c),
                GateOp::x(t),
                GateOp::ry(angle, t),
                GateOp::rx(angle, t),
            ]);
        } else {
            ops.push(op.clone());
        }
    }
    Circuit::new(circuit.num_qubits(), ops, circuit.shots()).expect("rewrite preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ghz_four() {
        let c = build_ghz(4, 30);
        assert_eq!(
            c.ops(),
            &[GateOp::h(0), GateOp::cx(0, 1), GateOp::cx(1, 2), GateOp::cx(2, 3), GateOp::measure_all()]
        );
        assert_eq!(c.shots(), 30);
        assert_eq!(build_ghz(1, 1).ops(), &[GateOp::h(0), GateOp::measure_all()]);
        assert_eq!(build_ghz(6, 100).ops().len(), 7);
    }

    #[test]
    fn ansatz_matches_generated_task() {
        let c = build_vqe_ansatz(4, &SAMPLE_ANSATZ_ANGLES, 100).unwrap();
        let ops = c.ops();
        // First layer and CX chain exactly as generated.
        assert_eq!(
            &ops[..7],
            &[
                GateOp::ry(2.858849, 0),
                GateOp::ry(1.445133, 1),
                GateOp::ry(2.136283, 2),
                GateOp::ry(2.293363, 3),
                GateOp::cx(0, 1),
                GateOp::cx(1, 2),
                GateOp::cx(2, 3),
            ]
        );
        assert_eq!(&ops[8..11], &[GateOp::ry(1.445133, 1), GateOp::ry(2.136283, 2), GateOp::ry(2.293363, 3)]);
        assert_eq!(ops.last(), Some(&GateOp::measure_all()));
        assert_eq!(ops.len(), 12);
    }

    #[test]
    fn ansatz_single_qubit_and_arity() {
        let c = build_vqe_ansatz(1, &[0.0, 0.0], 1).unwrap();
        assert_eq!(c.ops(), &[GateOp::ry(0.0, 0), GateOp::ry(0.0, 0), GateOp::measure_all()]);
        assert_eq!(
            build_vqe_ansatz(3, &[0.0; 5], 1),
            Err(AnsatzError::AngleArity { num_qubits: 3, expected: 6, got: 5 })
        );
        assert!(build_vqe_ansatz(1, &[f64::INFINITY, 0.0], 1).is_err());
        assert_eq!(build_vqe_ansatz(7, &[0.5; 14], 1).unwrap().ops().len(), 21);
    }

    #[test]
    fn cx_replacement_is_single_qubit_only() {
        let c = cx_replacement(&build_ghz(3, 10), std::f64::consts::FRAC_PI_2);
        assert!(c.ops().iter().all(|op| op.kind() != GateKind::Cx));
        assert_eq!(c.ops().len(), 1 + 2 * 8 + 1);
        assert!(c.is_measured());
    }

    proptest! {
        #[test]
        fn ghz_gate_counts(n in 1usize..40) {
            let c = build_ghz(n, 1);
            let count = |k| c.ops().iter().filter(|op| op.kind() == k).count();
            prop_assert_eq!(count(GateKind::H), 1);
            prop_assert_eq!(count(GateKind::Cx), n - 1);
            prop_assert_eq!(count(GateKind::MeasureAll), 1);
        }

        #[test]
        fn ansatz_op_count(angles in (2usize..16).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, 2 * n))) {
            let n = angles.len() / 2;
            prop_assert_eq!(build_vqe_ansatz(n, &angles, 1).unwrap().ops().len(), 3 * n);
        }
    }
}

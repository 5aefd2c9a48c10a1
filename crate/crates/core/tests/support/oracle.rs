//! Brute-force reference: every gate becomes an explicit 2^n × 2^n matrix
//! built from Kronecker products, and the circuit unitary is their product.
//! Shares no code with the simulator kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use conqure_core::{Circuit, GateKind, GateOp};
use num_complex::Complex64;
use rand::Rng;

pub type Matrix = Vec<Vec<Complex64>>;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim).map(|i| (0..dim).map(|j| if i == j { Complex64::new(1.0, 0.0) } else { zero() }).collect()).collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![zero(); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == zero() {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// 2×2 matrix from the textbook definitions, written from Euler's formula.
fn gate_2x2(kind: GateKind, params: &[f64]) -> Matrix {
    let r = |x: f64| Complex64::new(x, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match kind {
        GateKind::H => {
            let s = r(1.0 / 2f64.sqrt());
            vec![vec![s, s], vec![s, -s]]
        }
        GateKind::X => vec![vec![r(0.0), r(1.0)], vec![r(1.0), r(0.0)]],
        GateKind::Rx => {
            let t = params[0] / 2.0;
            vec![vec![r(t.cos()), -i * t.sin()], vec![-i * t.sin(), r(t.cos())]]
        }
        GateKind::Ry => {
            let t = params[0] / 2.0;
            vec![vec![r(t.cos()), r(-t.sin())], vec![r(t.sin()), r(t.cos())]]
        }
        GateKind::Rz => {
            let t = params[0] / 2.0;
            vec![vec![(-i * t).exp(), r(0.0)], vec![r(0.0), (i * t).exp()]]
        }
        _ => unreachable!(),
    }
}

/// Full-register matrix of one op. Basis index bit q is qubit q, so the
/// leftmost Kronecker factor is qubit n-1.
pub fn op_matrix(op: &GateOp, n: usize) -> Matrix {
    let dim = 1usize << n;
    match op.kind() {
        GateKind::MeasureAll => identity(dim),
        GateKind::Cx => {
            let (c, t) = (op.targets()[0], op.targets()[1]);
            let mut m = vec![vec![zero(); dim]; dim];
            for col in 0..dim {
                let row = if col >> c & 1 == 1 { col ^ (1 << t) } else { col };
                m[row][col] = Complex64::new(1.0, 0.0);
            }
            m
        }
        kind => {
            let u = gate_2x2(kind, op.params());
            let mut m = identity(1);
            for q in (0..n).rev() {
                let factor = if q == op.targets()[0] { u.clone() } else { identity(2) };
                m = kron(&m, &factor);
            }
            m
        }
    }
}

pub fn circuit_unitary(circuit: &Circuit) -> Matrix {
    let n = circuit.num_qubits();
    circuit.ops().iter().fold(identity(1 << n), |acc, op| matmul(&op_matrix(op, n), &acc))
}

/// Final state: first column of the circuit unitary.
pub fn oracle_state(circuit: &Circuit) -> Vec<Complex64> {
    circuit_unitary(circuit).iter().map(|row| row[0]).collect()
}

pub fn oracle_probabilities(circuit: &Circuit) -> Vec<f64> {
    oracle_state(circuit).iter().map(|a| a.norm_sqr()).collect()
}

/// Random valid circuit over the full gate set, terminated by `measure_all`.
pub fn random_circuit<R: Rng>(rng: &mut R, max_qubits: usize, max_gates: usize, shots: u64) -> Circuit {
    let n = rng.random_range(1..=max_qubits);
    let gates = rng.random_range(0..=max_gates);
    let mut ops = Vec::with_capacity(gates + 1);
    for _ in 0..gates {
        let q = rng.random_range(0..n);
        let theta = rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
        let op = match rng.random_range(0..6) {
            0 => GateOp::h(q),
            1 => GateOp::x(q),
            2 => GateOp::rx(theta, q),
            3 => GateOp::ry(theta, q),
            4 => GateOp::rz(theta, q),
            _ if n >= 2 => {
                let mut t = rng.random_range(0..n - 1);
                if t >= q {
                    t += 1;
                }
                GateOp::cx(q, t)
            }
            _ => GateOp::h(q),
        };
        ops.push(op);
    }
    ops.push(GateOp::measure_all());
    Circuit::new(n, ops, shots).unwrap()
}

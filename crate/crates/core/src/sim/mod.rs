//! Small-register simulation of logical circuits with Pauli channels.
//!
//! Qubit `q` is bit `q` of a basis-state index. Two-qubit matrices act on
//! `|first second>` with the first listed qubit as the more significant
//! factor, so `kron(a, b)` puts `a` on the first qubit.

mod circuit;
mod linalg;
mod state;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;

use crate::pauli::Pauli;

pub use circuit::{
    apply, distribution_csv, CompiledCircuit, ExecutionMode, LogicalCircuit, Op, Outcome,
    MAX_EXACT_QUBITS,
};
pub use linalg::{
    euler_zxz, haar_su4, interaction, kak_decompose, native_matrix, phase_distance,
    KakDecomposition, NativeOp,
};
pub use state::StateVector;

pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

/// Largest modulus among complex entries.
pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|i, j| a[(i >> 1, j >> 1)] * b[(i & 1, j & 1)])
}

pub fn pauli_matrix(p: Pauli) -> Mat2 {
    let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    match p {
        Pauli::I => Mat2::identity(),
        Pauli::X => Mat2::new(o, l, l, o),
        Pauli::Y => Mat2::new(o, -i, i, o),
        Pauli::Z => Mat2::new(l, o, o, -l),
    }
}

pub fn hadamard() -> Mat2 {
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Mat2::new(r, r, r, -r)
}

/// `diag(e^{-i t/2}, e^{i t/2})`.
pub fn rz(t: f64) -> Mat2 {
    let o = C64::new(0.0, 0.0);
    Mat2::new(C64::from_polar(1.0, -t / 2.0), o, o, C64::from_polar(1.0, t / 2.0))
}

/// `exp(-i t X / 2)`.
pub fn rx(t: f64) -> Mat2 {
    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    Mat2::new(C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0))
}

/// `exp(-i t Y / 2)`.
pub fn ry(t: f64) -> Mat2 {
    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    Mat2::new(C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0))
}

/// CNOT with the first qubit as control.
pub fn cnot() -> Mat4 {
    let mut m = Mat4::zeros();
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(i, j)] = C64::new(1.0, 0.0);
    }
    m
}

/// CZ (symmetric).
pub fn cz() -> Mat4 {
    let mut m = Mat4::identity();
    m[(3, 3)] = C64::new(-1.0, 0.0);
    m
}

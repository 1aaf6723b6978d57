//! Haar sampling and gate decompositions onto `{CNOT, H, Rz}`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{cnot, kron, max_abs, pauli_matrix, ry, rz, Mat2, Mat4};
use crate::error::{Error, Result};
use crate::pauli::Pauli;

const UNITARY_TOL: f64 = 1e-8;

fn unitarity_error2(u: &Mat2) -> f64 {
    max_abs((u.adjoint() * u - Mat2::identity()).iter())
}

fn unitarity_error4(u: &Mat4) -> f64 {
    max_abs((u.adjoint() * u - Mat4::identity()).iter())
}

pub(crate) fn check_unitary2(u: &Mat2, tol: f64) -> Result<()> {
    let e = unitarity_error2(u);
    if e <= tol {
        Ok(())
    } else {
        Err(Error::NotUnitary(e))
    }
}

pub(crate) fn check_unitary4(u: &Mat4, tol: f64) -> Result<()> {
    let e = unitarity_error4(u);
    if e <= tol {
        Ok(())
    } else {
        Err(Error::NotUnitary(e))
    }
}

/// Largest entrywise distance between `a` and `b` after aligning their
/// global phases.
pub fn phase_distance<const N: usize>(
    a: &nalgebra::SMatrix<C64, N, N>,
    b: &nalgebra::SMatrix<C64, N, N>,
) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    max_abs((a - b * phase).iter())
}

/// Haar-random element of SU(4).
pub fn haar_su4<R: Rng + ?Sized>(rng: &mut R) -> Mat4 {
    let mut g = Mat4::from_fn(|_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    // Modified Gram-Schmidt leaves R with a positive real diagonal, which is
    // exactly the phase fix that makes Q Haar distributed on U(4).
    for j in 0..4 {
        for k in 0..j {
            let proj = g.column(k).dotc(&g.column(j));
            let col_k = g.column(k).clone_owned();
            g.column_mut(j).axpy(-proj, &col_k, C64::new(1.0, 0.0));
        }
        let norm = g.column(j).norm();
        g.column_mut(j).unscale_mut(norm);
    }
    let root = g.determinant().powf(0.25);
    g.map(|z| z / root)
}

/// `exp(i (a XX + b YY + c ZZ))`.
pub fn interaction(a: f64, b: f64, c: f64) -> Mat4 {
    let magic = magic_basis();
    let eig = magic_eigenvalues();
    let diag = Vector4::from_fn(|k, _| {
        let theta = a * eig[0][k] + b * eig[1][k] + c * eig[2][k];
        C64::from_polar(1.0, theta)
    });
    magic * Mat4::from_diagonal(&diag) * magic.adjoint()
}

fn magic_basis() -> Mat4 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let o = C64::new(0.0, 0.0);
    let one = C64::new(r, 0.0);
    let i = C64::new(0.0, r);
    Mat4::new(
        one, o, o, i, //
        o, i, one, o, //
        o, i, -one, o, //
        one, o, o, -i,
    )
}

// Diagonal of XX, YY, ZZ in the magic basis.
fn magic_eigenvalues() -> [[f64; 4]; 3] {
    let b = magic_basis();
    let mut out = [[0.0; 4]; 3];
    for (row, p) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().enumerate() {
        let m = pauli_matrix(p);
        let d = b.adjoint() * kron(&m, &m) * b;
        for k in 0..4 {
            out[row][k] = d[(k, k)].re;
        }
    }
    out
}

/// Splits `l = a (x) b` into its two factors, each unitary when `l` is.
fn kron_factor(l: &Mat4) -> (Mat2, Mat2) {
    let block = |i: usize, j: usize| l.fixed_view::<2, 2>(2 * i, 2 * j).clone_owned();
    let (bi, bj) = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .max_by(|&(i, j), &(k, m)| block(i, j).norm().total_cmp(&block(k, m).norm()))
        .expect("four blocks");
    let big = block(bi, bj);
    let b = big / C64::new((big.norm_squared() / 2.0).sqrt(), 0.0);
    let a = Mat2::from_fn(|i, j| (b.adjoint() * block(i, j)).trace() / 2.0);
    (a, b)
}

/// `u = phase * (after.0 (x) after.1) * interaction(a, b, c) * (before.0 (x) before.1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KakDecomposition {
    pub before: (Mat2, Mat2),
    pub after: (Mat2, Mat2),
    pub angles: (f64, f64, f64),
    pub phase: C64,
}

/// One step of a decomposed two-qubit block, qubits numbered 0 and 1 within
/// the block.
#[derive(Debug, Clone, PartialEq)]
pub enum NativeOp {
    Local { qubit: usize, u: Mat2 },
    Cnot { control: usize, target: usize },
}

impl KakDecomposition {
    pub fn matrix(&self) -> Mat4 {
        let (a, b, c) = self.angles;
        kron(&self.after.0, &self.after.1)
            * interaction(a, b, c)
            * kron(&self.before.0, &self.before.1)
            * self.phase
    }

    /// Time-ordered circuit with exactly three CNOTs and one local per qubit
    /// in each of the four layers around them, equal to the block up to
    /// global phase.
    pub fn native_ops(&self) -> Vec<NativeOp> {
        let (a, b, c) = self.angles;
        let id = Mat2::identity();
        let layers: [(Mat2, Mat2); 4] = [
            (self.before.0, rz(FRAC_PI_2) * self.before.1),
            (rz(FRAC_PI_2 - 2.0 * c), ry(FRAC_PI_2 - 2.0 * a)),
            (id, ry(2.0 * b - FRAC_PI_2)),
            (self.after.0 * rz(-FRAC_PI_2), self.after.1),
        ];
        let cnots = [(1, 0), (0, 1), (1, 0)];
        let mut ops = Vec::with_capacity(11);
        for (i, (u0, u1)) in layers.into_iter().enumerate() {
            ops.push(NativeOp::Local { qubit: 0, u: u0 });
            ops.push(NativeOp::Local { qubit: 1, u: u1 });
            if let Some(&(control, target)) = cnots.get(i) {
                ops.push(NativeOp::Cnot { control, target });
            }
        }
        ops
    }
}

/// Product of a native op sequence, qubit 0 as the first tensor factor.
pub fn native_matrix(ops: &[NativeOp]) -> Mat4 {
    let id = Mat2::identity();
    ops.iter().fold(Mat4::identity(), |acc, op| {
        let m = match op {
            NativeOp::Local { qubit: 0, u } => kron(u, &id),
            NativeOp::Local { u, .. } => kron(&id, u),
            NativeOp::Cnot { control: 0, .. } => cnot(),
            NativeOp::Cnot { .. } => {
                let swap = swap();
                swap * cnot() * swap
            }
        };
        m * acc
    })
}

fn swap() -> Mat4 {
    let mut s = Mat4::zeros();
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        s[(i, j)] = C64::new(1.0, 0.0);
    }
    s
}

/// Cartan decomposition of a two-qubit unitary.
pub fn kak_decompose(u: &Mat4) -> Result<KakDecomposition> {
    check_unitary4(u, UNITARY_TOL)?;
    let root = u.determinant().powf(0.25);
    let su = u / root;
    let magic = magic_basis();
    let up = magic.adjoint() * su * magic;
    let m = up.transpose() * up;
    let re = m.map(|z| z.re);
    let im = m.map(|z| z.im);

    // Re M and Im M commute, so a generic combination shares their eigenbasis.
    let mut p = None;
    for r in [0.577_350_269, 1.414_213_562, -0.318_309_886, 2.718_281_828, 0.123_456_789] {
        let eig = SymmetricEigen::new(re + im * r);
        let q = eig.eigenvectors;
        let qc = q.map(|x| C64::new(x, 0.0));
        let d = qc.transpose() * m * qc;
        let mut off = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    off = off.max(d[(i, j)].norm());
                }
            }
        }
        if off < 1e-9 {
            p = Some(q);
            break;
        }
    }
    let mut p: Matrix4<f64> =
        p.ok_or_else(|| Error::InvalidArgument("failed to diagonalize KAK kernel".into()))?;
    if p.determinant() < 0.0 {
        p.column_mut(0).neg_mut();
    }
    let pc = p.map(|x| C64::new(x, 0.0));
    let d2 = pc.transpose() * m * pc;
    let mut d = Vector4::from_fn(|k, _| d2[(k, k)].sqrt());
    let o1 = |d: &Vector4<C64>| up * pc * Mat4::from_diagonal(&d.map(|z| z.inv()));
    if o1(&d).determinant().re < 0.0 {
        d[0] = -d[0];
    }
    let o1 = o1(&d).map(|z| C64::new(z.re, 0.0));

    let k1 = magic * o1 * magic.adjoint();
    let k2 = magic * pc.transpose() * magic.adjoint();
    let (a1, b1) = kron_factor(&k1);
    let (a2, b2) = kron_factor(&k2);

    // theta_k = phi + a ev_xx[k] + b ev_yy[k] + c ev_zz[k]; the rows form a
    // Hadamard matrix, so the inverse is its transpose over four.
    let ev = magic_eigenvalues();
    let theta: Vec<f64> = d.iter().map(|z| z.arg()).collect();
    let solve = |row: usize| -> f64 { (0..4).map(|k| theta[k] * ev[row][k]).sum::<f64>() / 4.0 };
    let angles = (solve(0), solve(1), solve(2));

    let mut kak = KakDecomposition {
        before: (a2, b2),
        after: (a1, b1),
        angles,
        phase: C64::new(1.0, 0.0),
    };
    // the leftover scalar collects the determinant root, the mean of theta
    // and the phases split off by kron_factor
    let rebuilt = kak.matrix();
    let overlap = (rebuilt.adjoint() * u).trace() / 4.0;
    kak.phase = overlap / overlap.norm();
    Ok(kak)
}

/// Angles `(alpha, beta, gamma)` with `u = e^{i phi} Rz(alpha) Rx(beta) Rz(gamma)`.
pub fn euler_zxz(u: &Mat2) -> Result<(f64, f64, f64)> {
    check_unitary2(u, UNITARY_TOL)?;
    let v = u / u.determinant().sqrt();
    let (a, b) = (v[(0, 0)], v[(0, 1)]);
    let beta = 2.0 * b.norm().atan2(a.norm());
    let sum = -2.0 * a.arg();
    let diff = -2.0 * b.arg() - PI;
    let (alpha, gamma) = if b.norm() < 1e-12 {
        (sum, 0.0)
    } else if a.norm() < 1e-12 {
        (diff, 0.0)
    } else {
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };
    Ok((wrap(alpha), beta, wrap(gamma)))
}

fn wrap(t: f64) -> f64 {
    let w = (t + PI).rem_euclid(2.0 * PI) - PI;
    if w.abs() < 1e-15 {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{hadamard, rx};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_u2(rng: &mut ChaCha8Rng) -> Mat2 {
        let (a, b, c, p): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        rz(6.0 * a) * rx(6.0 * b) * rz(6.0 * c) * C64::from_polar(1.0, 6.0 * p)
    }

    #[test]
    fn haar_samples_are_special_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let u = haar_su4(&mut rng);
            assert!(unitarity_error4(&u) < 1e-12);
            assert!((u.determinant() - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let a = haar_su4(&mut ChaCha8Rng::seed_from_u64(9));
        let b = haar_su4(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn interaction_matches_generators() {
        let x = pauli_matrix(Pauli::X);
        let y = pauli_matrix(Pauli::Y);
        let z = pauli_matrix(Pauli::Z);
        let (xx, yy, zz) = (kron(&x, &x), kron(&y, &y), kron(&z, &z));
        // the three commute, so exponentiate each on its own
        let e = |p: &Mat4, t: f64| Mat4::identity() * C64::new(t.cos(), 0.0) + p * C64::new(0.0, t.sin());
        let direct = e(&xx, 0.3) * e(&yy, -0.7) * e(&zz, 1.1);
        assert!(max_abs((interaction(0.3, -0.7, 1.1) - direct).iter()) < 1e-14);
    }

    #[test]
    fn native_circuit_realizes_interaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let kak = KakDecomposition {
                before: (Mat2::identity(), Mat2::identity()),
                after: (Mat2::identity(), Mat2::identity()),
                angles: (4.0 * a - 2.0, 4.0 * b - 2.0, 4.0 * c - 2.0),
                phase: C64::new(1.0, 0.0),
            };
            let ops = kak.native_ops();
            assert_eq!(ops.iter().filter(|o| matches!(o, NativeOp::Cnot { .. })).count(), 3);
            assert!(phase_distance(&native_matrix(&ops), &kak.matrix()) < 1e-12);
        }
    }

    #[test]
    fn kak_reconstructs_haar_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let u = haar_su4(&mut rng);
            let kak = kak_decompose(&u).unwrap();
            assert!(max_abs((kak.matrix() - u).iter()) < 1e-9);
            assert!(phase_distance(&native_matrix(&kak.native_ops()), &u) < 1e-9);
            for f in [kak.before.0, kak.before.1, kak.after.0, kak.after.1] {
                assert!(unitarity_error2(&f) < 1e-9);
            }
        }
    }

    fn canonical(angles: (f64, f64, f64)) -> [f64; 3] {
        let q = std::f64::consts::FRAC_PI_4;
        let mut v = [angles.0, angles.1, angles.2].map(|t| {
            let r = (t + q).rem_euclid(FRAC_PI_2) - q;
            r.abs()
        });
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn kak_of_special_gates() {
        let cn = kak_decompose(&cnot()).unwrap();
        assert!(max_abs((cn.matrix() - cnot()).iter()) < 1e-9);
        let c = canonical(cn.angles);
        assert!((c[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-9 && c[1] < 1e-9 && c[2] < 1e-9, "{c:?}");

        let id = kak_decompose(&Mat4::identity()).unwrap();
        assert!(canonical(id.angles).iter().all(|&t| t < 1e-9));
        assert!(max_abs((id.matrix() - Mat4::identity()).iter()) < 1e-12);
        for f in [id.before.0, id.before.1, id.after.0, id.after.1] {
            assert!(phase_distance(&f, &Mat2::identity()) < 1e-9);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let local = kron(&random_u2(&mut rng), &random_u2(&mut rng));
            let kak = kak_decompose(&local).unwrap();
            assert!(max_abs((kak.matrix() - local).iter()) < 1e-9);
            assert!(canonical(kak.angles).iter().all(|&t| t < 1e-7));
        }
    }

    #[test]
    fn kak_rejects_non_unitary() {
        let bad = Mat4::identity() * C64::new(2.0, 0.0);
        assert!(matches!(kak_decompose(&bad), Err(Error::NotUnitary(_))));
    }

    fn zxz(a: f64, b: f64, c: f64) -> Mat2 {
        rz(a) * rx(b) * rz(c)
    }

    #[test]
    fn euler_examples() {
        let (a, b, c) = euler_zxz(&hadamard()).unwrap();
        assert!(phase_distance(&zxz(a, b, c), &hadamard()) < 1e-10);

        let (a, b, c) = euler_zxz(&rz(0.7)).unwrap();
        assert!((a + c - 0.7).abs() < 1e-12 && b.abs() < 1e-12);
        assert!((a - 0.7).abs() < 1e-12 && c == 0.0);

        let (_, b, _) = euler_zxz(&pauli_matrix(Pauli::X)).unwrap();
        assert!((b - PI).abs() < 1e-12);

        let h_via = hadamard() * rz(0.4) * hadamard();
        assert!(phase_distance(&h_via, &rx(0.4)) < 1e-14);
    }

    #[test]
    fn euler_reconstructs_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..2000 {
            let u = random_u2(&mut rng);
            let (a, b, c) = euler_zxz(&u).unwrap();
            assert!(phase_distance(&zxz(a, b, c), &u) < 1e-10);
        }
        let bad = Mat2::new(
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        );
        assert!(euler_zxz(&bad).is_err());
    }
}

//! Dense kernels on bit-indexed registers (qubit `q` is bit `q`).

use num_complex::Complex64 as C64;

pub type Gate1 = [[C64; 2]; 2];

const O: C64 = C64::new(0.0, 0.0);
const L: C64 = C64::new(1.0, 0.0);

pub fn zero_state(n: usize) -> Vec<C64> {
    let mut v = vec![O; 1 << n];
    v[0] = L;
    v
}

pub fn h() -> Gate1 {
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[r, r], [r, -r]]
}

/// Maps the `+1` eigenvector of `cos(t) X + sin(t) Y` to `|+>`.
pub fn unphase(t: f64) -> Gate1 {
    [[L, O], [O, C64::from_polar(1.0, -t)]]
}

pub fn matmul(a: &Gate1, b: &Gate1) -> Gate1 {
    let mut m = [[O; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

pub fn apply_1q(psi: &mut [C64], q: usize, u: &Gate1) {
    let bit = 1 << q;
    for i in 0..psi.len() {
        if i & bit == 0 {
            let (a, b) = (psi[i], psi[i | bit]);
            psi[i] = u[0][0] * a + u[0][1] * b;
            psi[i | bit] = u[1][0] * a + u[1][1] * b;
        }
    }
}

pub fn apply_cz(psi: &mut [C64], a: usize, b: usize) {
    let m = (1 << a) | (1 << b);
    for (i, x) in psi.iter_mut().enumerate() {
        if i & m == m {
            *x = -*x;
        }
    }
}

pub fn apply_cnot(psi: &mut [C64], control: usize, target: usize) {
    let (c, t) = (1 << control, 1 << target);
    for i in 0..psi.len() {
        if i & c != 0 && i & t == 0 {
            psi.swap(i, i | t);
        }
    }
}

/// Single-qubit Pauli by code: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn apply_pauli(psi: &mut [C64], q: usize, code: u8) {
    let bit = 1 << q;
    match code {
        0 => {}
        1 => {
            for i in 0..psi.len() {
                if i & bit == 0 {
                    psi.swap(i, i | bit);
                }
            }
        }
        2 => {
            // Y|0> = i|1>, Y|1> = -i|0>
            let im = C64::new(0.0, 1.0);
            for i in 0..psi.len() {
                if i & bit == 0 {
                    let (a, b) = (psi[i], psi[i | bit]);
                    psi[i] = -im * b;
                    psi[i | bit] = im * a;
                }
            }
        }
        3 => {
            for (i, x) in psi.iter_mut().enumerate() {
                if i & bit != 0 {
                    *x = -*x;
                }
            }
        }
        _ => panic!("bad pauli code {code}"),
    }
}

pub fn prob_one(psi: &[C64], q: usize) -> f64 {
    let bit = 1 << q;
    psi.iter().enumerate().filter(|(i, _)| i & bit != 0).map(|(_, a)| a.norm_sqr()).sum()
}

/// Zeroes the amplitudes inconsistent with `outcome` on `q`.
pub fn project(psi: &mut [C64], q: usize, outcome: u8) {
    let bit = 1 << q;
    for (i, x) in psi.iter_mut().enumerate() {
        if ((i & bit != 0) as u8) != outcome {
            *x = O;
        }
    }
}

pub fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum()
}

pub fn scale(psi: &mut [C64], s: f64) {
    for x in psi.iter_mut() {
        *x *= s;
    }
}

/// `<a|b>`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Row-major `dim x dim` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl Density {
    pub fn pure(psi: &[C64]) -> Self {
        let dim = psi.len();
        let mut data = vec![O; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        Density { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Density { dim, data: vec![O; dim * dim] }
    }

    /// `rho -> A rho A^dagger` for a linear map `A` given as a vector kernel.
    pub fn conjugate(&mut self, f: impl Fn(&mut [C64])) {
        let d = self.dim;
        let mut col = vec![O; d];
        for j in 0..d {
            for i in 0..d {
                col[i] = self.data[i * d + j];
            }
            f(&mut col);
            for i in 0..d {
                self.data[i * d + j] = col[i];
            }
        }
        for i in 0..d {
            let row = &mut self.data[i * d..(i + 1) * d];
            for x in row.iter_mut() {
                *x = x.conj();
            }
            f(row);
            for x in row.iter_mut() {
                *x = x.conj();
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Density, w: f64) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y * w;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum()
    }

    /// `<psi| rho |psi>`.
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        let d = self.dim;
        let mut acc = O;
        for i in 0..d {
            if psi[i] == O {
                continue;
            }
            let mut row = O;
            for j in 0..d {
                row += self.data[i * d + j] * psi[j];
            }
            acc += psi[i].conj() * row;
        }
        acc.re
    }

    /// Depolarizing noise with total rate `p` on the listed qubits.
    pub fn depolarize(&mut self, qubits: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let k = qubits.len() as u32;
        let others = (4usize.pow(k) - 1) as f64;
        let mut acc = self.clone();
        scale(&mut acc.data, 1.0 - p);
        for code in 1..4usize.pow(k) {
            let mut term = self.clone();
            term.conjugate(|v| {
                for (j, &q) in qubits.iter().enumerate() {
                    apply_pauli(v, q, ((code >> (2 * j)) & 3) as u8);
                }
            });
            acc.add_scaled(&term, p / others);
        }
        *self = acc;
    }
}

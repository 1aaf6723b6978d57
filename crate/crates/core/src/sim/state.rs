use num_complex::Complex64 as C64;

use super::{Mat2, Mat4};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Largest register a state vector may hold.
pub const MAX_STATE_QUBITS: usize = 26;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n: usize) -> Result<Self> {
        if n > MAX_STATE_QUBITS {
            return Err(Error::UnsupportedQubitCount(n));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.is_empty() || amps.len() != 1 << n {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        let s = StateVector { n, amps };
        let norm = s.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub(crate) fn check_site(&self, q: usize) -> Result<()> {
        if q < self.n {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange { site: q, n: self.n })
        }
    }

    pub fn apply_1q(&mut self, q: usize, u: &Mat2) -> Result<()> {
        self.check_site(q)?;
        self.apply_1q_unchecked(q, u);
        Ok(())
    }

    pub(crate) fn apply_1q_unchecked(&mut self, q: usize, u: &Mat2) {
        let bit = 1usize << q;
        let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = u00 * a0 + u01 * a1;
                self.amps[i | bit] = u10 * a0 + u11 * a1;
            }
        }
    }

    /// Applies `u` on `(a, b)`, `a` being the more significant factor.
    pub fn apply_2q(&mut self, a: usize, b: usize, u: &Mat4) -> Result<()> {
        self.check_site(a)?;
        self.check_site(b)?;
        if a == b {
            return Err(Error::SiteCollision(a));
        }
        self.apply_2q_unchecked(a, b, u);
        Ok(())
    }

    pub(crate) fn apply_2q_unchecked(&mut self, a: usize, b: usize, u: &Mat4) {
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & (ba | bb) != 0 {
                continue;
            }
            let idx = [i, i | bb, i | ba, i | ba | bb];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = u[(r, 0)] * v[0] + u[(r, 1)] * v[1] + u[(r, 2)] * v[2] + u[(r, 3)] * v[3];
            }
        }
    }

    /// Applies the Pauli `p` whose qubit `j` acts on `sites[j]`.
    pub fn apply_pauli(&mut self, p: &PauliString, sites: &[usize]) -> Result<()> {
        if p.num_qubits() != sites.len() {
            return Err(Error::DimensionMismatch { expected: sites.len(), found: p.num_qubits() });
        }
        crate::pauli::check_sites(sites, self.n)?;
        let (mut flip, mut zmask, mut ys) = (0usize, 0usize, 0u32);
        for (j, &s) in sites.iter().enumerate() {
            match p.get(j) {
                Pauli::I => {}
                Pauli::X => flip |= 1 << s,
                Pauli::Z => zmask |= 1 << s,
                Pauli::Y => {
                    flip |= 1 << s;
                    zmask |= 1 << s;
                    ys += 1;
                }
            }
        }
        // Y = i X Z: apply Z, then X, then the scalar i^ys
        let scalar = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)]
            [(ys % 4) as usize];
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let sign = if (i & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[i ^ flip] = a * sign * scalar;
        }
        self.amps = out;
        Ok(())
    }
}

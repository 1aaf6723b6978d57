//! Physical simulation of a measurement pattern with a reference register.
//!
//! Each logical input is maximally entangled with a reference qubit, the
//! cluster is built CZ by CZ and every non-output site is measured. After the
//! byproduct correction the reference and output qubits hold the Choi state of
//! the implemented logical channel; its overlaps with `(I x P U)|Phi>` are the
//! Pauli error probabilities.
//!
//! Byproduct corrections come from forced-outcome noiseless runs: the
//! correction for outcome `e_k` is whichever Pauli maps the conditional output
//! back to the target Choi state.

use std::collections::BTreeMap;

use mbqv_core::mbqc::{Gate, MeasurementBasis, MeasurementPattern};
use mbqv_core::pauli::{Pauli, PauliString};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{self, Density, Gate1};

/// Logical Pauli as per-qubit codes packed two bits per qubit
/// (`0 = I, 1 = X, 2 = Y, 3 = Z`).
type Code = usize;

fn code_pauli(code: Code, j: usize) -> u8 {
    ((code >> (2 * j)) & 3) as u8
}

/// Product up to phase.
fn code_mul(a: Code, b: Code, n: usize) -> Code {
    // map to (x, z) bits, xor, map back
    let xz = |c: u8| -> (u8, u8) {
        match c {
            0 => (0, 0),
            1 => (1, 0),
            2 => (1, 1),
            _ => (0, 1),
        }
    };
    let back = |x: u8, z: u8| -> u8 {
        match (x, z) {
            (0, 0) => 0,
            (1, 0) => 1,
            (1, 1) => 2,
            _ => 3,
        }
    };
    (0..n).fold(0, |acc, j| {
        let (ax, az) = xz(code_pauli(a, j));
        let (bx, bz) = xz(code_pauli(b, j));
        acc | (back(ax ^ bx, az ^ bz) as usize) << (2 * j)
    })
}

pub fn code_to_pauli(code: Code, n: usize) -> PauliString {
    let mut s = PauliString::identity(n);
    for j in 0..n {
        s.set(j, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][code_pauli(code, j) as usize]);
    }
    s
}

/// Rotates the measured basis onto the computational one (`+1` to `|0>`).
fn basis_rotation(b: MeasurementBasis) -> Gate1 {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    match b {
        MeasurementBasis::Z => [[l, o], [o, l]],
        MeasurementBasis::X => dense::h(),
        // S^dagger maps (|0> + i|1>) to |+>
        MeasurementBasis::Y => dense::matmul(&dense::h(), &dense::unphase(std::f64::consts::FRAC_PI_2)),
        MeasurementBasis::Plane(t) => dense::matmul(&dense::h(), &dense::unphase(t)),
    }
}

#[derive(Debug, Clone)]
enum Event {
    Prep { slot: usize },
    Cz { a: usize, b: usize },
    Measure { slot: usize, rotation: Gate1 },
}

/// Noise rates of the physical pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalNoise {
    pub p_cz: f64,
    pub p_m: f64,
}

#[derive(Debug)]
pub struct PatternOracle {
    n_logical: usize,
    n_slots: usize,
    out_slots: Vec<usize>,
    initial: Vec<C64>,
    events: Vec<Event>,
    /// Choi targets `(I x P U)|Phi>` indexed by code.
    targets: Vec<Vec<C64>>,
    /// Correction for the all-`+` branch, then per measurement.
    base_correction: Code,
    corrections: Vec<Code>,
}

fn apply_target(psi: &mut [C64], gate: Gate, outs: &[usize]) -> Result<(), String> {
    match gate {
        Gate::Hadamard => dense::apply_1q(psi, outs[0], &dense::h()),
        Gate::Cnot => dense::apply_cnot(psi, outs[0], outs[1]),
        Gate::Cz => dense::apply_cz(psi, outs[0], outs[1]),
        Gate::Rotation(t) if t == 0.0 => {}
        g => return Err(format!("no reference unitary for {g}")),
    }
    Ok(())
}

impl PatternOracle {
    pub fn new(p: &MeasurementPattern) -> Result<Self, String> {
        let n = p.num_logical();
        let inputs = p.inputs().to_vec();
        let outputs = p.outputs().to_vec();
        let edges = p.edges().to_vec();

        // slot allocation: refs first, inputs next, others on first use
        let mut slot_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut free: Vec<usize> = Vec::new();
        let mut n_slots = n;
        for &s in &inputs {
            slot_of.insert(s, n_slots);
            n_slots += 1;
        }
        let mut last_edge = vec![None; p.num_sites()];
        for (e, &(a, b)) in edges.iter().enumerate() {
            last_edge[a] = Some(e);
            last_edge[b] = Some(e);
        }
        let mut events = Vec::new();
        let mut measured = Vec::new();
        let mut alloc = |slot_of: &mut BTreeMap<usize, usize>, events: &mut Vec<Event>, s: usize, free: &mut Vec<usize>| {
            if !slot_of.contains_key(&s) {
                let slot = free.pop().unwrap_or_else(|| {
                    n_slots += 1;
                    n_slots - 1
                });
                slot_of.insert(s, slot);
                events.push(Event::Prep { slot });
            }
        };
        let measure = |s: usize, slot_of: &mut BTreeMap<usize, usize>, events: &mut Vec<Event>, free: &mut Vec<usize>, measured: &mut Vec<usize>| {
            let slot = slot_of.remove(&s).expect("live site");
            let rotation = basis_rotation(p.basis(s).expect("measured site"));
            events.push(Event::Measure { slot, rotation });
            free.push(slot);
            measured.push(s);
        };
        for (e, &(a, b)) in edges.iter().enumerate() {
            alloc(&mut slot_of, &mut events, a, &mut free);
            alloc(&mut slot_of, &mut events, b, &mut free);
            events.push(Event::Cz { a: slot_of[&a], b: slot_of[&b] });
            for s in [a, b] {
                if p.basis(s).is_some() && last_edge[s] == Some(e) {
                    measure(s, &mut slot_of, &mut events, &mut free, &mut measured);
                }
            }
        }
        for s in 0..p.num_sites() {
            if p.basis(s).is_some() && last_edge[s].is_none() {
                alloc(&mut slot_of, &mut events, s, &mut free);
                measure(s, &mut slot_of, &mut events, &mut free, &mut measured);
            }
        }
        for &o in &outputs {
            alloc(&mut slot_of, &mut events, o, &mut free);
        }
        let out_slots: Vec<usize> = outputs.iter().map(|o| slot_of[o]).collect();
        let n_slots = n_slots;
        if n_slots > 20 {
            return Err(format!("pattern needs {n_slots} live qubits"));
        }

        let bell = |psi: &mut Vec<C64>, pairs: &[(usize, usize)]| {
            for &(r, s) in pairs {
                dense::apply_1q(psi, r, &dense::h());
                dense::apply_cnot(psi, r, s);
            }
        };
        let mut initial = dense::zero_state(n_slots);
        let in_pairs: Vec<(usize, usize)> = (0..n).map(|j| (j, n + j)).collect();
        bell(&mut initial, &in_pairs);

        let out_pairs: Vec<(usize, usize)> = out_slots.iter().copied().enumerate().collect();
        let mut targets = Vec::new();
        for code in 0..(1usize << (2 * n)) {
            let mut t = dense::zero_state(n_slots);
            bell(&mut t, &out_pairs);
            apply_target(&mut t, p.target_gate(), &out_slots)?;
            for (j, &q) in out_slots.iter().enumerate() {
                dense::apply_pauli(&mut t, q, code_pauli(code, j));
            }
            targets.push(t);
        }

        let mut oracle = PatternOracle {
            n_logical: n,
            n_slots,
            out_slots,
            initial,
            events,
            targets,
            base_correction: 0,
            corrections: Vec::new(),
        };
        let m = measured.len();
        let identify = |o: &PatternOracle, forced: &[u8]| -> Result<Code, String> {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let (psi, _) = o.run(None, Some(forced), &mut rng)?;
            o.targets
                .iter()
                .position(|t| (dense::inner(t, &psi).norm() - 1.0).abs() < 1e-9)
                .ok_or_else(|| format!("branch {forced:?} is not a Pauli image of the target"))
        };
        let base = identify(&oracle, &vec![0; m])?;
        let mut corrections = Vec::with_capacity(m);
        for k in 0..m {
            let mut forced = vec![0; m];
            forced[k] = 1;
            corrections.push(code_mul(identify(&oracle, &forced)?, base, n));
        }
        oracle.base_correction = base;
        oracle.corrections = corrections;
        Ok(oracle)
    }

    pub fn num_slots(&self) -> usize {
        self.n_slots
    }

    pub fn num_measurements(&self) -> usize {
        self.corrections.len()
    }

    fn correction(&self, outcomes: &[u8]) -> Code {
        outcomes
            .iter()
            .zip(&self.corrections)
            .filter(|(o, _)| **o == 1)
            .fold(self.base_correction, |acc, (_, &c)| code_mul(acc, c, self.n_logical))
    }

    /// One run; measured slots end in `|0>`. Returns the normalized state and
    /// the outcomes in measurement order.
    fn run(
        &self,
        noise: Option<PhysicalNoise>,
        forced: Option<&[u8]>,
        rng: &mut impl Rng,
    ) -> Result<(Vec<C64>, Vec<u8>), String> {
        let mut psi = self.initial.clone();
        let mut outcomes = Vec::new();
        for ev in &self.events {
            match ev {
                Event::Prep { slot } => dense::apply_1q(&mut psi, *slot, &dense::h()),
                Event::Cz { a, b } => {
                    dense::apply_cz(&mut psi, *a, *b);
                    if let Some(nz) = noise {
                        if rng.random::<f64>() < nz.p_cz {
                            let code = rng.random_range(1..16usize);
                            dense::apply_pauli(&mut psi, *a, (code & 3) as u8);
                            dense::apply_pauli(&mut psi, *b, (code >> 2) as u8);
                        }
                    }
                }
                Event::Measure { slot, rotation } => {
                    if let Some(nz) = noise {
                        if rng.random::<f64>() < nz.p_m {
                            dense::apply_pauli(&mut psi, *slot, rng.random_range(1..4u8));
                        }
                    }
                    dense::apply_1q(&mut psi, *slot, rotation);
                    let p1 = dense::prob_one(&psi, *slot);
                    let outcome = match forced {
                        Some(f) => f[outcomes.len()],
                        None => (rng.random::<f64>() < p1) as u8,
                    };
                    let p = if outcome == 1 { p1 } else { 1.0 - p1 };
                    if p < 1e-12 {
                        return Err(format!("outcome {outcome} has probability {p}"));
                    }
                    dense::project(&mut psi, *slot, outcome);
                    dense::scale(&mut psi, 1.0 / p.sqrt());
                    if outcome == 1 {
                        dense::apply_pauli(&mut psi, *slot, 1);
                    }
                    outcomes.push(outcome);
                }
            }
        }
        Ok((psi, outcomes))
    }

    fn corrected(&self, mut psi: Vec<C64>, outcomes: &[u8]) -> Vec<C64> {
        let c = self.correction(outcomes);
        let outs = self.out_slots.clone();
        for (j, &q) in outs.iter().enumerate() {
            dense::apply_pauli(&mut psi, q, code_pauli(c, j));
        }
        psi
    }

    /// Pauli probabilities of one noisy trajectory's corrected Choi state.
    fn overlaps(&self, psi: &[C64]) -> Vec<f64> {
        self.targets.iter().map(|t| dense::inner(t, psi).norm_sqr()).collect()
    }

    /// Monte Carlo estimate of every channel term with its standard error.
    pub fn trajectory_channel(
        &self,
        noise: PhysicalNoise,
        trajectories: usize,
        seed: u64,
    ) -> Result<ChannelEstimate, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.targets.len();
        let (mut sum, mut sum2) = (vec![0.0; k], vec![0.0; k]);
        for _ in 0..trajectories {
            let (psi, outcomes) = self.run(Some(noise), None, &mut rng)?;
            let psi = self.corrected(psi, &outcomes);
            for (i, w) in self.overlaps(&psi).into_iter().enumerate() {
                sum[i] += w;
                sum2[i] += w * w;
            }
        }
        let n = trajectories as f64;
        let mut terms = BTreeMap::new();
        for i in 0..k {
            let mean = sum[i] / n;
            let var = (sum2[i] / n - mean * mean).max(0.0) * n / (n - 1.0);
            terms.insert(code_to_pauli(i, self.n_logical), (mean, (var / n).sqrt()));
        }
        Ok(ChannelEstimate { terms })
    }

    /// Exact channel from the density matrix of all live qubits, summing over
    /// every outcome branch. Only for small registers.
    pub fn density_channel(&self, noise: PhysicalNoise) -> Result<BTreeMap<PauliString, f64>, String> {
        if self.n_slots > 10 {
            return Err(format!("{} qubits is too many for the density oracle", self.n_slots));
        }
        // branches: list of (density, outcomes); measured slots reset to |0>
        let mut branches = vec![(Density::pure(&self.initial), Vec::<u8>::new())];
        for ev in &self.events {
            let mut next = Vec::with_capacity(branches.len());
            for (mut rho, outs) in branches {
                match ev {
                    Event::Prep { slot } => {
                        rho.conjugate(|v| dense::apply_1q(v, *slot, &dense::h()));
                        next.push((rho, outs));
                    }
                    Event::Cz { a, b } => {
                        rho.conjugate(|v| dense::apply_cz(v, *a, *b));
                        rho.depolarize(&[*a, *b], noise.p_cz);
                        next.push((rho, outs));
                    }
                    Event::Measure { slot, rotation } => {
                        rho.depolarize(&[*slot], noise.p_m);
                        rho.conjugate(|v| dense::apply_1q(v, *slot, rotation));
                        for outcome in 0..2u8 {
                            let mut r = rho.clone();
                            r.conjugate(|v| {
                                dense::project(v, *slot, outcome);
                                if outcome == 1 {
                                    dense::apply_pauli(v, *slot, 1);
                                }
                            });
                            if r.trace() > 0.0 {
                                let mut o = outs.clone();
                                o.push(outcome);
                                next.push((r, o));
                            }
                        }
                    }
                }
            }
            branches = next;
        }
        let outs = self.out_slots.clone();
        let mut total = Density::zeros(1 << self.n_slots);
        for (mut rho, outcomes) in branches {
            let c = self.correction(&outcomes);
            rho.conjugate(|v| {
                for (j, &q) in outs.iter().enumerate() {
                    dense::apply_pauli(v, q, code_pauli(c, j));
                }
            });
            total.add_scaled(&rho, 1.0);
        }
        Ok((0..self.targets.len())
            .map(|i| (code_to_pauli(i, self.n_logical), total.expectation(&self.targets[i])))
            .collect())
    }

    /// Fidelity of a noiseless sampled run with the target Choi state.
    pub fn noiseless_fidelity(&self, seed: u64) -> Result<f64, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (psi, outcomes) = self.run(None, None, &mut rng)?;
        Ok(dense::inner(&self.targets[0], &self.corrected(psi, &outcomes)).norm_sqr())
    }
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// `(mean, standard error)` per logical Pauli.
    pub terms: BTreeMap<PauliString, (f64, f64)>,
}

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use super::linalg::{check_unitary2, check_unitary4};
use super::state::StateVector;
use super::{pauli_matrix, Mat2, Mat4};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::pauli::{PauliChannel, PauliString};

/// Largest register the density-matrix path accepts.
pub const MAX_EXACT_QUBITS: usize = 12;

const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum Op {
    OneQubit { site: usize, u: Mat2 },
    /// `u` acts on `|sites[0] sites[1]>`.
    TwoQubit { sites: [usize; 2], u: Mat4 },
    /// Qubit `j` of the channel acts on `sites[j]`.
    Channel { sites: Vec<usize>, channel: Arc<PauliChannel> },
}

impl Op {
    fn sites(&self) -> &[usize] {
        match self {
            Op::OneQubit { site, .. } => std::slice::from_ref(site),
            Op::TwoQubit { sites, .. } => sites,
            Op::Channel { sites, .. } => sites,
        }
    }
}

/// Ordered gates and Pauli channels on `n` qubits.
#[derive(Debug, Clone, Default)]
pub struct LogicalCircuit {
    n: usize,
    ops: Vec<Op>,
}

impl LogicalCircuit {
    pub fn new(n: usize) -> Self {
        LogicalCircuit { n, ops: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn num_channels(&self) -> usize {
        self.ops.iter().filter(|o| matches!(o, Op::Channel { .. })).count()
    }

    pub fn push_1q(&mut self, site: usize, u: Mat2) -> Result<()> {
        crate::pauli::check_sites(&[site], self.n)?;
        check_unitary2(&u, UNITARY_TOL)?;
        self.ops.push(Op::OneQubit { site, u });
        Ok(())
    }

    pub fn push_2q(&mut self, a: usize, b: usize, u: Mat4) -> Result<()> {
        crate::pauli::check_sites(&[a, b], self.n)?;
        check_unitary4(&u, UNITARY_TOL)?;
        self.ops.push(Op::TwoQubit { sites: [a, b], u });
        Ok(())
    }

    pub fn push_channel(&mut self, sites: &[usize], channel: Arc<PauliChannel>) -> Result<()> {
        crate::pauli::check_sites(sites, self.n)?;
        if sites.len() != channel.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: sites.len(),
                found: channel.num_qubits(),
            });
        }
        if sites.len() > 2 {
            return Err(Error::UnsupportedQubitCount(sites.len()));
        }
        channel.validate()?;
        self.ops.push(Op::Channel { sites: sites.to_vec(), channel });
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// Sample one Pauli per channel and evolve a state vector.
    Trajectory,
    /// Evolve the density matrix under the full channels.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    State(StateVector),
    Distribution(Vec<f64>),
}

/// One trajectory or the exact outcome distribution of `circuit` on `state`.
pub fn apply<R: Rng + ?Sized>(
    state: &StateVector,
    circuit: &LogicalCircuit,
    rng: &mut R,
    mode: ExecutionMode,
) -> Result<Outcome> {
    let compiled = CompiledCircuit::new(circuit)?;
    if state.num_qubits() != circuit.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: circuit.num_qubits(),
            found: state.num_qubits(),
        });
    }
    match mode {
        ExecutionMode::Trajectory => {
            let mut s = state.clone();
            compiled.run_trajectory(&mut s, rng);
            Ok(Outcome::State(s))
        }
        ExecutionMode::Exact => compiled.exact_distribution(state).map(Outcome::Distribution),
    }
}

#[derive(Debug)]
struct Sampler {
    terms: Vec<PauliString>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(c: &PauliChannel) -> Self {
        // identity first, so the common case exits on the first comparison
        let id = PauliString::identity(c.num_qubits());
        let mut terms = vec![id];
        let mut cdf = vec![c.prob(&id)];
        for (p, w) in c.terms() {
            if !p.is_identity() {
                terms.push(*p);
                cdf.push(cdf.last().expect("non-empty") + w);
            }
        }
        Sampler { terms, cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf.last().expect("non-empty");
        if u < self.cdf[0] {
            return 0;
        }
        self.cdf.partition_point(|&c| c <= u).min(self.terms.len() - 1)
    }
}

#[derive(Debug)]
enum Item {
    Unitary(DMatrix<C64>),
    Channel { sampler: usize, channel: Arc<PauliChannel>, positions: Vec<usize> },
}

/// Consecutive operations confined to at most two qubits.
#[derive(Debug)]
struct Group {
    sites: Vec<usize>,
    items: Vec<Item>,
    ideal: DMatrix<C64>,
}

/// A circuit with adjacent operations fused into one- and two-qubit groups.
#[derive(Debug)]
pub struct CompiledCircuit {
    n: usize,
    groups: Vec<Group>,
    samplers: Vec<Sampler>,
    n_channels: usize,
}

fn lift_pauli(p: &PauliString, positions: &[usize], k: usize) -> DMatrix<C64> {
    let mut local = vec![crate::pauli::Pauli::I; k];
    for (j, &pos) in positions.iter().enumerate() {
        local[pos] = p.get(j);
    }
    local
        .iter()
        .fold(DMatrix::identity(1, 1), |acc, &q| acc.kronecker(&to_dyn2(&pauli_matrix(q))))
}

fn to_dyn2(u: &Mat2) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| u[(i, j)])
}

fn to_dyn4(u: &Mat4) -> DMatrix<C64> {
    DMatrix::from_fn(4, 4, |i, j| u[(i, j)])
}

fn swap_dyn() -> DMatrix<C64> {
    let mut s = DMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        s[(i, j)] = C64::new(1.0, 0.0);
    }
    s
}

impl CompiledCircuit {
    pub fn new(circuit: &LogicalCircuit) -> Result<Self> {
        let mut samplers: Vec<Sampler> = Vec::new();
        let mut sampler_of: Vec<(*const PauliChannel, usize)> = Vec::new();
        let mut groups = Vec::new();
        let mut pending: Vec<&Op> = Vec::new();
        let mut support: Vec<usize> = Vec::new();

        let mut flush = |pending: &mut Vec<&Op>, support: &mut Vec<usize>| {
            if pending.is_empty() {
                return;
            }
            let k = support.len();
            let dim = 1 << k;
            let pos = |s: usize| support.iter().position(|&t| t == s).expect("in support");
            let mut items = Vec::with_capacity(pending.len());
            for op in pending.iter() {
                items.push(match op {
                    Op::OneQubit { site, u } => {
                        let m = to_dyn2(u);
                        Item::Unitary(if k == 1 {
                            m
                        } else if pos(*site) == 0 {
                            m.kronecker(&DMatrix::identity(2, 2))
                        } else {
                            DMatrix::identity(2, 2).kronecker(&m)
                        })
                    }
                    Op::TwoQubit { sites, u } => {
                        let m = to_dyn4(u);
                        Item::Unitary(if pos(sites[0]) == 0 { m } else { swap_dyn() * m * swap_dyn() })
                    }
                    Op::Channel { sites, channel } => {
                        let key = Arc::as_ptr(channel);
                        let idx = match sampler_of.iter().find(|(p, _)| *p == key) {
                            Some(&(_, i)) => i,
                            None => {
                                samplers.push(Sampler::new(channel));
                                sampler_of.push((key, samplers.len() - 1));
                                samplers.len() - 1
                            }
                        };
                        Item::Channel {
                            sampler: idx,
                            channel: Arc::clone(channel),
                            positions: sites.iter().map(|&s| pos(s)).collect(),
                        }
                    }
                });
            }
            let ideal = items.iter().fold(DMatrix::identity(dim, dim), |acc, item| match item {
                Item::Unitary(u) => u * acc,
                Item::Channel { .. } => acc,
            });
            groups.push(Group { sites: support.clone(), items, ideal });
            pending.clear();
            support.clear();
        };

        for op in circuit.ops() {
            let mut union = support.clone();
            for &s in op.sites() {
                if !union.contains(&s) {
                    union.push(s);
                }
            }
            if union.len() > 2 {
                flush(&mut pending, &mut support);
                union = op.sites().to_vec();
            }
            support = union;
            pending.push(op);
        }
        flush(&mut pending, &mut support);

        Ok(CompiledCircuit { n: circuit.num_qubits(), groups, samplers, n_channels: circuit.num_channels() })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_channels(&self) -> usize {
        self.n_channels
    }

    fn apply_group_matrix(state: &mut StateVector, sites: &[usize], m: &DMatrix<C64>) {
        match sites {
            [a] => state.apply_1q_unchecked(*a, &Mat2::from_fn(|i, j| m[(i, j)])),
            [a, b] => state.apply_2q_unchecked(*a, *b, &Mat4::from_fn(|i, j| m[(i, j)])),
            _ => unreachable!("groups span one or two qubits"),
        }
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.num_qubits() == self.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.n, found: state.num_qubits() })
        }
    }

    /// Noiseless evolution: every channel skipped.
    pub fn ideal_state(&self, init: &StateVector) -> Result<StateVector> {
        self.check_state(init)?;
        let mut s = init.clone();
        for g in &self.groups {
            Self::apply_group_matrix(&mut s, &g.sites, &g.ideal);
        }
        Ok(s)
    }

    /// One quantum trajectory: a Pauli drawn from every channel (one uniform
    /// variate per channel) is inserted as a unitary.
    pub fn run_trajectory<R: Rng + ?Sized>(&self, state: &mut StateVector, rng: &mut R) {
        assert_eq!(state.num_qubits(), self.n, "state width");
        let mut hits: Vec<(usize, usize)> = Vec::new();
        for g in &self.groups {
            hits.clear();
            for (i, item) in g.items.iter().enumerate() {
                if let Item::Channel { sampler, .. } = item {
                    let k = self.samplers[*sampler].sample(rng);
                    if k != 0 {
                        hits.push((i, k));
                    }
                }
            }
            if hits.is_empty() {
                Self::apply_group_matrix(state, &g.sites, &g.ideal);
                continue;
            }
            let dim = 1 << g.sites.len();
            let mut m = DMatrix::identity(dim, dim);
            let mut next = hits.iter().peekable();
            for (i, item) in g.items.iter().enumerate() {
                match item {
                    Item::Unitary(u) => m = u * m,
                    Item::Channel { sampler, positions, .. } => {
                        if let Some(&&(j, k)) = next.peek() {
                            if j == i {
                                let p = &self.samplers[*sampler].terms[k];
                                m = lift_pauli(p, positions, g.sites.len()) * m;
                                next.next();
                            }
                        }
                    }
                }
            }
            Self::apply_group_matrix(state, &g.sites, &m);
        }
    }

    fn superoperator(g: &Group) -> DMatrix<C64> {
        let k = g.sites.len();
        let dim = 1 << k;
        let mut s = DMatrix::identity(dim * dim, dim * dim);
        for item in &g.items {
            let step = match item {
                Item::Unitary(u) => u.kronecker(&u.map(|z| z.conj())),
                Item::Channel { channel, positions, .. } => {
                    let mut acc = DMatrix::zeros(dim * dim, dim * dim);
                    for (p, w) in channel.terms() {
                        let m = lift_pauli(p, positions, k);
                        acc += m.kronecker(&m.map(|z| z.conj())) * C64::new(w, 0.0);
                    }
                    acc
                }
            };
            s = step * s;
        }
        s
    }

    /// Outcome distribution of the full mixed-state evolution of `init`.
    pub fn exact_distribution(&self, init: &StateVector) -> Result<Vec<f64>> {
        self.check_state(init)?;
        if self.n > MAX_EXACT_QUBITS {
            return Err(Error::ExactModeTooLarge { n: self.n, max: MAX_EXACT_QUBITS });
        }
        let dim = 1usize << self.n;
        let amps = init.amplitudes();
        let mut rho: Vec<C64> = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                rho.push(amps[r] * amps[c].conj());
            }
        }
        let mut buf = Vec::new();
        for g in &self.groups {
            let sup = Self::superoperator(g);
            let k = g.sites.len();
            let ldim = 1usize << k;
            // local index l (site 0 most significant) -> global bit mask
            let masks: Vec<usize> = (0..ldim)
                .map(|l| {
                    g.sites
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| l >> (k - 1 - j) & 1 == 1)
                        .fold(0, |m, (_, &s)| m | 1 << s)
                })
                .collect();
            let group_bits = masks[ldim - 1];
            buf.resize(ldim * ldim, C64::new(0.0, 0.0));
            for r0 in (0..dim).filter(|r| r & group_bits == 0) {
                for c0 in (0..dim).filter(|c| c & group_bits == 0) {
                    for (lr, mr) in masks.iter().enumerate() {
                        for (lc, mc) in masks.iter().enumerate() {
                            buf[lr * ldim + lc] = rho[(r0 | mr) * dim + (c0 | mc)];
                        }
                    }
                    for (lr, mr) in masks.iter().enumerate() {
                        for (lc, mc) in masks.iter().enumerate() {
                            let row = lr * ldim + lc;
                            let mut acc = C64::new(0.0, 0.0);
                            for (col, v) in buf.iter().enumerate() {
                                acc += sup[(row, col)] * v;
                            }
                            rho[(r0 | mr) * dim + (c0 | mc)] = acc;
                        }
                    }
                }
            }
        }
        Ok((0..dim).map(|i| rho[i * dim + i].re.max(0.0)).collect())
    }
}

/// `bitstring,probability` rows; bitstrings list qubit 0 first.
pub fn distribution_csv(probs: &[f64]) -> Result<String> {
    let n = probs.len().trailing_zeros() as usize;
    if probs.is_empty() || probs.len() != 1 << n {
        return Err(Error::InvalidDistribution(format!("{} entries", probs.len())));
    }
    let mut out = String::from("bitstring,probability\n");
    for (i, p) in probs.iter().enumerate() {
        let bits: String = (0..n).map(|q| if i >> q & 1 == 1 { '1' } else { '0' }).collect();
        out.push_str(&format!("{bits},{}\n", g17(*p)));
    }
    Ok(out)
}

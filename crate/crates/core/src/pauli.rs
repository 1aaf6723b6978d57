//! Pauli strings, Clifford conjugation and Pauli error channels.
//!
//! Every effective noise model in the crate is normalised to a
//! [`PauliChannel`]: a probability distribution over n-qubit Pauli operators
//! acting as `rho -> sum_P p_P P rho P`. Phases are tracked while conjugating
//! through Cliffords ([`SignedPauli`]) and dropped at the channel level, where
//! they cannot be observed.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::fmt::G17;

/// Largest register a [`PauliString`] can describe.
pub const MAX_QUBITS: usize = 64;

/// Tolerance on the total mass of a channel.
pub const CHANNEL_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-qubit commutation.
    pub fn commutes_with(self, other: Pauli) -> bool {
        let (x1, z1) = self.bits();
        let (x2, z2) = other.bits();
        !((x1 & z2) ^ (z1 & x2))
    }
}

/// An n-qubit Hermitian Pauli operator in symplectic form.
///
/// Bit `q` of `x`/`z` is the X/Z component on qubit `q`; `Y` sets both.
/// Labels are written qubit 0 first: `"XZ"` is `X_0 Z_1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: u8,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        PauliString { n: n as u8, x: 0, z: 0 }
    }

    pub fn from_masks(n: usize, x: u64, z: u64) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::UnsupportedQubitCount(n));
        }
        let mask = full_mask(n);
        if x & !mask != 0 || z & !mask != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask bits set beyond qubit count {n}"
            )));
        }
        Ok(PauliString { n: n as u8, x, z })
    }

    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self> {
        if qubit >= n {
            return Err(Error::SiteOutOfRange { site: qubit, n });
        }
        let mut s = PauliString::identity(n);
        s.set(qubit, p);
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        debug_assert!(qubit < self.num_qubits());
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        debug_assert!(qubit < self.num_qubits());
        let (x, z) = p.bits();
        let bit = 1u64 << qubit;
        self.x = (self.x & !bit) | if x { bit } else { 0 };
        self.z = (self.z & !bit) | if z { bit } else { 0 };
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Product with the phase discarded.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        check_same(self.num_qubits(), other.num_qubits())?;
        Ok(PauliString { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z })
    }

    /// The operator restricted to `sites`, relabelled `0..sites.len()`.
    pub fn restrict(&self, sites: &[usize]) -> PauliString {
        let mut out = PauliString::identity(sites.len());
        for (i, &s) in sites.iter().enumerate() {
            out.set(i, self.get(s));
        }
        out
    }

    /// Places `self` on `sites` of an `n_total`-qubit register.
    pub fn embed(&self, sites: &[usize], n_total: usize) -> Result<PauliString> {
        check_sites(sites, n_total)?;
        check_same(self.num_qubits(), sites.len())?;
        let mut out = PauliString::identity(n_total);
        for (i, &s) in sites.iter().enumerate() {
            out.set(s, self.get(i));
        }
        Ok(out)
    }

    /// All `4^n` strings in lexicographic (`I < X < Y < Z`) order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        assert!(n <= 16, "enumeration limited to 16 qubits");
        (0..1u64 << (2 * n)).map(move |k| {
            let mut s = PauliString::identity(n);
            for q in 0..n {
                // base-4 digits, qubit 0 most significant
                let digit = (k >> (2 * (n - 1 - q))) & 3;
                s.set(q, Pauli::ALL[digit as usize]);
            }
            s
        })
    }

    fn code(&self, q: usize) -> u8 {
        match self.get(q) {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then_with(|| {
            for q in 0..self.num_qubits() {
                match self.code(q).cmp(&other.code(q)) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.num_qubits() {
            write!(f, "{}", self.get(q).label())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n > MAX_QUBITS {
            return Err(Error::InvalidPauliLabel(s.into()));
        }
        let mut out = PauliString::identity(n);
        for (q, c) in s.chars().enumerate() {
            let p = match c {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return Err(Error::InvalidPauliLabel(s.into())),
            };
            out.set(q, p);
        }
        Ok(out)
    }
}

/// A Pauli string with a phase `i^phase`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedPauli {
    pub pauli: PauliString,
    /// Power of `i`, modulo 4.
    pub phase: u8,
}

impl SignedPauli {
    pub fn new(pauli: PauliString) -> Self {
        SignedPauli { pauli, phase: 0 }
    }

    pub fn negated(pauli: PauliString) -> Self {
        SignedPauli { pauli, phase: 2 }
    }

    pub fn is_negative(&self) -> bool {
        self.phase == 2
    }

    /// Operator product `self * other`, phase included.
    pub fn mul(&self, other: &SignedPauli) -> Result<SignedPauli> {
        let pauli = self.pauli.mul(&other.pauli)?;
        let g = product_phase(&self.pauli, &other.pauli);
        let phase = (self.phase as i32 + other.phase as i32 + g).rem_euclid(4) as u8;
        Ok(SignedPauli { pauli, phase })
    }
}

// Exponent of i picked up by the product of two Hermitian Paulis
// (Aaronson-Gottesman g function summed over qubits).
fn product_phase(a: &PauliString, b: &PauliString) -> i32 {
    let mut total = 0i32;
    for q in 0..a.num_qubits() {
        let (x1, z1) = a.get(q).bits();
        let (x2, z2) = b.get(q).bits();
        let (x2, z2) = (x2 as i32, z2 as i32);
        total += match (x1, z1) {
            (false, false) => 0,
            (true, true) => z2 - x2,
            (true, false) => z2 * (2 * x2 - 1),
            (false, true) => x2 * (1 - 2 * z2),
        };
    }
    total
}

/// A Clifford unitary given by the images of the generators `X_q`, `Z_q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliffordMap {
    n: usize,
    x_images: Vec<SignedPauli>,
    z_images: Vec<SignedPauli>,
}

impl CliffordMap {
    pub fn identity(n: usize) -> Self {
        let gen = |p| {
            (0..n)
                .map(|q| SignedPauli::new(PauliString::single(n, q, p).expect("in range")))
                .collect()
        };
        CliffordMap { n, x_images: gen(Pauli::X), z_images: gen(Pauli::Z) }
    }

    /// Builds a map from explicit images, checking the symplectic condition.
    pub fn from_images(x_images: Vec<SignedPauli>, z_images: Vec<SignedPauli>) -> Result<Self> {
        let n = x_images.len();
        check_same(n, z_images.len())?;
        for img in x_images.iter().chain(&z_images) {
            check_same(n, img.pauli.num_qubits())?;
            if img.phase % 2 == 1 {
                return Err(Error::NotSymplectic("image is not Hermitian".into()));
            }
        }
        let map = CliffordMap { n, x_images, z_images };
        map.check_symplectic()?;
        Ok(map)
    }

    pub fn hadamard(n: usize, q: usize) -> Result<Self> {
        let mut c = CliffordMap::identity(n);
        check_sites(&[q], n)?;
        c.x_images[q] = SignedPauli::new(PauliString::single(n, q, Pauli::Z)?);
        c.z_images[q] = SignedPauli::new(PauliString::single(n, q, Pauli::X)?);
        Ok(c)
    }

    /// Phase gate `S = diag(1, i)`: `X -> Y`, `Z -> Z`.
    pub fn phase(n: usize, q: usize) -> Result<Self> {
        let mut c = CliffordMap::identity(n);
        check_sites(&[q], n)?;
        c.x_images[q] = SignedPauli::new(PauliString::single(n, q, Pauli::Y)?);
        Ok(c)
    }

    pub fn cz(n: usize, a: usize, b: usize) -> Result<Self> {
        check_sites(&[a, b], n)?;
        let mut c = CliffordMap::identity(n);
        let mut xa = PauliString::single(n, a, Pauli::X)?;
        xa.set(b, Pauli::Z);
        let mut xb = PauliString::single(n, b, Pauli::X)?;
        xb.set(a, Pauli::Z);
        c.x_images[a] = SignedPauli::new(xa);
        c.x_images[b] = SignedPauli::new(xb);
        Ok(c)
    }

    pub fn cnot(n: usize, control: usize, target: usize) -> Result<Self> {
        check_sites(&[control, target], n)?;
        let mut c = CliffordMap::identity(n);
        let mut xc = PauliString::single(n, control, Pauli::X)?;
        xc.set(target, Pauli::X);
        let mut zt = PauliString::single(n, target, Pauli::Z)?;
        zt.set(control, Pauli::Z);
        c.x_images[control] = SignedPauli::new(xc);
        c.z_images[target] = SignedPauli::new(zt);
        Ok(c)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, q: usize) -> &SignedPauli {
        &self.x_images[q]
    }

    pub fn z_image(&self, q: usize) -> &SignedPauli {
        &self.z_images[q]
    }

    /// The Clifford "apply `self`, then `next`".
    pub fn then(&self, next: &CliffordMap) -> Result<CliffordMap> {
        check_same(self.n, next.n)?;
        let map = |imgs: &[SignedPauli]| -> Result<Vec<SignedPauli>> {
            imgs.iter().map(|p| conjugate_signed(p, next)).collect()
        };
        Ok(CliffordMap {
            n: self.n,
            x_images: map(&self.x_images)?,
            z_images: map(&self.z_images)?,
        })
    }

    fn check_symplectic(&self) -> Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                let xz = self.x_images[i].pauli.commutes_with(&self.z_images[j].pauli);
                if xz == (i == j) {
                    return Err(Error::NotSymplectic(format!("X{i} vs Z{j}")));
                }
                if i < j
                    && (!self.x_images[i].pauli.commutes_with(&self.x_images[j].pauli)
                        || !self.z_images[i].pauli.commutes_with(&self.z_images[j].pauli))
                {
                    return Err(Error::NotSymplectic(format!("generators {i}, {j}")));
                }
            }
        }
        Ok(())
    }
}

/// `c p c^dagger` with the phase tracked.
pub fn conjugate_signed(p: &SignedPauli, c: &CliffordMap) -> Result<SignedPauli> {
    check_same(c.n, p.pauli.num_qubits())?;
    let mut acc = SignedPauli { pauli: PauliString::identity(c.n), phase: p.phase };
    for q in 0..c.n {
        let (x, z) = p.pauli.get(q).bits();
        if x && z {
            // Y = i X Z
            acc.phase = (acc.phase + 1) % 4;
        }
        if x {
            acc = acc.mul(&c.x_images[q])?;
        }
        if z {
            acc = acc.mul(&c.z_images[q])?;
        }
    }
    Ok(acc)
}

/// `c p c^dagger` up to phase.
pub fn conjugate(p: &PauliString, c: &CliffordMap) -> Result<PauliString> {
    Ok(conjugate_signed(&SignedPauli::new(*p), c)?.pauli)
}

/// A probability distribution over n-qubit Pauli operators.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliChannel {
    n: usize,
    probs: BTreeMap<PauliString, f64>,
}

impl PauliChannel {
    pub fn identity(n: usize) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(PauliString::identity(n), 1.0);
        PauliChannel { n, probs }
    }

    /// Builds a channel, merging repeated strings. Zero-weight terms are dropped.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let mut probs = BTreeMap::new();
        for (p, w) in terms {
            check_same(n, p.num_qubits())?;
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidChannel(format!("weight {w} on {p}")));
            }
            *probs.entry(p).or_insert(0.0) += w;
        }
        let channel = PauliChannel::from_map(n, probs);
        channel.validate()?;
        Ok(channel)
    }

    fn from_map(n: usize, mut probs: BTreeMap<PauliString, f64>) -> Self {
        probs.retain(|_, w| *w > 0.0);
        PauliChannel { n, probs }
    }

    /// `{I: 1-q, p: q}`.
    pub fn bernoulli(p: PauliString, q: f64) -> Result<Self> {
        check_probability("flip probability", q)?;
        let n = p.num_qubits();
        PauliChannel::from_terms(n, [(PauliString::identity(n), 1.0 - q), (p, q)])
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn prob(&self, p: &PauliString) -> f64 {
        self.probs.get(p).copied().unwrap_or(0.0)
    }

    /// Terms in lexicographic order of their labels.
    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.probs.iter().map(|(p, w)| (p, *w))
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Probability of any non-identity Pauli, summed term by term so that it
    /// stays accurate when it is far below machine epsilon relative to 1.
    pub fn error_mass(&self) -> f64 {
        self.probs.iter().filter(|(p, _)| !p.is_identity()).fold(0.0, |acc, (_, w)| acc + w)
    }

    /// Pushes every term through a homomorphism onto an `n_out`-qubit register.
    pub fn map_paulis<F>(&self, n_out: usize, mut f: F) -> Result<PauliChannel>
    where
        F: FnMut(&PauliString) -> Result<PauliString>,
    {
        let mut probs = BTreeMap::new();
        for (p, w) in &self.probs {
            let image = f(p)?;
            check_same(n_out, image.num_qubits())?;
            *probs.entry(image).or_insert(0.0) += w;
        }
        Ok(PauliChannel::from_map(n_out, probs))
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|(p, w)| p.num_qubits() != self.n || !(*w >= 0.0)) {
            return Err(Error::InvalidChannel("negative weight or wrong width".into()));
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > CHANNEL_SUM_TOL {
            return Err(Error::InvalidChannel(format!("total mass {total}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ChannelJson::from(self)).expect("channel serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ChannelJsonIn =
            serde_json::from_str(s).map_err(|e| Error::InvalidChannel(e.to_string()))?;
        let terms = raw
            .terms
            .into_iter()
            .map(|t| Ok((t.pauli.parse::<PauliString>()?, t.prob)))
            .collect::<Result<Vec<_>>>()?;
        PauliChannel::from_terms(raw.n, terms)
    }
}

#[derive(Serialize)]
struct ChannelJson {
    n: usize,
    terms: Vec<TermJson>,
}

#[derive(Serialize)]
struct TermJson {
    pauli: String,
    prob: G17,
}

impl From<&PauliChannel> for ChannelJson {
    fn from(c: &PauliChannel) -> Self {
        ChannelJson {
            n: c.n,
            terms: c
                .terms()
                .map(|(p, w)| TermJson { pauli: p.to_string(), prob: G17(w) })
                .collect(),
        }
    }
}

impl Serialize for PauliChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelJson::from(self).serialize(s)
    }
}

#[derive(Deserialize)]
struct ChannelJsonIn {
    n: usize,
    terms: Vec<TermJsonIn>,
}

#[derive(Deserialize)]
struct TermJsonIn {
    pauli: String,
    prob: f64,
}

/// Isotropic depolarizing channel: identity with weight `1 - p`, every other
/// Pauli with `p / (4^n - 1)`.
pub fn depolarizing_channel(n: usize, p: f64) -> Result<PauliChannel> {
    if !(1..=2).contains(&n) {
        return Err(Error::UnsupportedQubitCount(n));
    }
    check_probability("depolarizing rate", p)?;
    let others = ((1usize << (2 * n)) - 1) as f64;
    let terms = PauliString::all(n).map(|s| {
        let w = if s.is_identity() { 1.0 - p } else { p / others };
        (s, w)
    });
    PauliChannel::from_terms(n, terms)
}

/// Sequential application of two independent Pauli channels.
pub fn compose(a: &PauliChannel, b: &PauliChannel) -> Result<PauliChannel> {
    check_same(a.n, b.n)?;
    let mut probs = BTreeMap::new();
    for (p, wp) in &a.probs {
        for (q, wq) in &b.probs {
            let r = p.mul(q)?;
            *probs.entry(r).or_insert(0.0) += wp * wq;
        }
    }
    Ok(PauliChannel::from_map(a.n, probs))
}

/// Tensors `c` with identity on every qubit outside `sites`.
pub fn embed(c: &PauliChannel, sites: &[usize], n_total: usize) -> Result<PauliChannel> {
    check_same(c.n, sites.len())?;
    check_sites(sites, n_total)?;
    c.map_paulis(n_total, |p| p.embed(sites, n_total))
}

/// Entanglement (process) fidelity of a Pauli channel against the identity.
pub fn process_fidelity(c: &PauliChannel) -> f64 {
    c.prob(&PauliString::identity(c.n))
}

/// Average gate fidelity `(d F_e + 1) / (d + 1)` with `d = 2^n`.
pub fn average_gate_fidelity(c: &PauliChannel) -> f64 {
    1.0 - average_gate_infidelity(c)
}

/// `1 - average_gate_fidelity`, computed from the error mass directly.
pub fn average_gate_infidelity(c: &PauliChannel) -> f64 {
    let d = (1u64 << c.n) as f64;
    d * c.error_mass() / (d + 1.0)
}

fn check_same(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn check_sites(sites: &[usize], n: usize) -> Result<()> {
    for (i, &s) in sites.iter().enumerate() {
        if s >= n {
            return Err(Error::SiteOutOfRange { site: s, n });
        }
        if sites[..i].contains(&s) {
            return Err(Error::SiteCollision(s));
        }
    }
    Ok(())
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn depolarizing_examples() {
        let c = depolarizing_channel(1, 0.0).unwrap();
        assert_eq!(c.support_len(), 1);
        assert_eq!(c.prob(&ps("I")), 1.0);

        let c = depolarizing_channel(1, 0.3).unwrap();
        assert!(approx(c.prob(&ps("I")), 0.7));
        for l in ["X", "Y", "Z"] {
            assert!(approx(c.prob(&ps(l)), 0.1));
        }

        let c = depolarizing_channel(2, 0.15).unwrap();
        assert!(approx(c.prob(&ps("II")), 0.85));
        assert_eq!(c.support_len(), 16);
        for (p, w) in c.terms() {
            if !p.is_identity() {
                assert!(approx(w, 0.01), "{p}: {w}");
            }
        }
    }

    #[test]
    fn depolarizing_rejects_bad_rate() {
        assert!(matches!(
            depolarizing_channel(1, 1.2),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(depolarizing_channel(1, -0.1).is_err());
        assert!(matches!(depolarizing_channel(3, 0.1), Err(Error::UnsupportedQubitCount(3))));
    }

    #[test]
    fn cz_conjugation() {
        let cz = CliffordMap::cz(2, 0, 1).unwrap();
        assert_eq!(conjugate(&ps("XI"), &cz).unwrap(), ps("XZ"));
        assert_eq!(conjugate(&ps("ZI"), &cz).unwrap(), ps("ZI"));
        let yy = conjugate_signed(&SignedPauli::new(ps("YY")), &cz).unwrap();
        assert_eq!(yy, SignedPauli::new(ps("XX")));
    }

    #[test]
    fn hadamard_flips_y_sign() {
        let h = CliffordMap::hadamard(1, 0).unwrap();
        let img = conjugate_signed(&SignedPauli::new(ps("Y")), &h).unwrap();
        assert_eq!(img.pauli, ps("Y"));
        assert!(img.is_negative());
        assert_eq!(conjugate(&ps("Y"), &h).unwrap(), ps("Y"));
    }

    #[test]
    fn conjugate_dimension_mismatch() {
        let h = CliffordMap::hadamard(2, 0).unwrap();
        assert!(matches!(
            conjugate(&ps("X"), &h),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn from_images_rejects_non_symplectic() {
        let x = vec![SignedPauli::new(ps("X"))];
        let z = vec![SignedPauli::new(ps("X"))];
        assert!(matches!(CliffordMap::from_images(x, z), Err(Error::NotSymplectic(_))));
    }

    #[test]
    fn compose_examples() {
        let c = depolarizing_channel(2, 0.15).unwrap();
        assert_eq!(compose(&PauliChannel::identity(2), &c).unwrap(), c);

        let q = 0.1;
        let flip = PauliChannel::bernoulli(ps("X"), q).unwrap();
        let two = compose(&flip, &flip).unwrap();
        assert!(approx(two.prob(&ps("X")), 2.0 * q * (1.0 - q)));
        assert!(approx(two.prob(&ps("I")), 1.0 - 2.0 * q * (1.0 - q)));
    }

    // Pauli transfer matrix of a single-qubit Pauli channel: diagonal with
    // entries lambda_Q = sum_P p_P (+1 if P, Q commute else -1).
    fn ptm_1q(c: &PauliChannel) -> [f64; 4] {
        let mut diag = [0.0; 4];
        for (k, q) in Pauli::ALL.iter().enumerate() {
            diag[k] = Pauli::ALL
                .iter()
                .map(|p| {
                    let w = c.prob(&PauliString::single(1, 0, *p).unwrap());
                    if p.commutes_with(*q) { w } else { -w }
                })
                .sum();
        }
        diag
    }

    #[test]
    fn compose_matches_transfer_matrix_product() {
        for &p in &[0.01, 0.2, 0.6, 0.75] {
            let d = depolarizing_channel(1, p).unwrap();
            let dd = compose(&d, &d).unwrap();
            let single = ptm_1q(&d);
            let twice = ptm_1q(&dd);
            for k in 0..4 {
                assert!((twice[k] - single[k] * single[k]).abs() < 1e-14);
            }
            // depolarizing is closed under composition: shrink factor squares
            let lambda = 1.0 - 4.0 * p / 3.0;
            let p2 = 0.75 * (1.0 - lambda * lambda);
            let expect = depolarizing_channel(1, p2).unwrap();
            for s in PauliString::all(1) {
                assert!((dd.prob(&s) - expect.prob(&s)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn embed_examples() {
        let id = PauliChannel::identity(1);
        let e = embed(&id, &[2], 4).unwrap();
        assert_eq!(e.prob(&ps("IIII")), 1.0);

        let x = PauliChannel::from_terms(1, [(ps("X"), 1.0)]).unwrap();
        let e = embed(&x, &[0], 2).unwrap();
        assert_eq!(e.prob(&ps("XI")), 1.0);

        let d = depolarizing_channel(2, 0.15).unwrap();
        let e = embed(&d, &[1, 3], 4).unwrap();
        assert_eq!(e.support_len(), 16);
        for (p, _) in e.terms() {
            assert_eq!(p.get(0), Pauli::I);
            assert_eq!(p.get(2), Pauli::I);
        }
        let rebuilt: Vec<_> = e.terms().map(|(p, w)| (p.restrict(&[1, 3]), w)).collect();
        for (p, w) in rebuilt {
            assert_eq!(w, d.prob(&p));
        }
    }

    #[test]
    fn embed_errors() {
        let d = depolarizing_channel(2, 0.1).unwrap();
        assert!(matches!(embed(&d, &[1, 1], 3), Err(Error::SiteCollision(1))));
        assert!(matches!(embed(&d, &[0, 5], 3), Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(average_gate_fidelity(&PauliChannel::identity(1)), 1.0);
        let full = depolarizing_channel(1, 0.75).unwrap();
        assert!((average_gate_fidelity(&full) - 0.5).abs() < 1e-15);
        let d2 = depolarizing_channel(2, 0.15).unwrap();
        assert!((average_gate_fidelity(&d2) - 0.88).abs() < 1e-14);
        assert!((process_fidelity(&d2) - 0.85).abs() < 1e-15);
    }

    // Average gate fidelity from the Pauli transfer matrix:
    // F = (tr(R)/d + 1)/(d + 1) for a unital channel, d = 2^n.
    #[test]
    fn fidelity_matches_transfer_matrix_trace() {
        for n in 1..=2usize {
            for &p in &[0.0, 0.05, 0.3, 0.9] {
                let c = depolarizing_channel(n, p).unwrap();
                let d = (1usize << n) as f64;
                let trace: f64 = PauliString::all(n)
                    .map(|q| {
                        c.terms()
                            .map(|(pp, w)| if pp.commutes_with(&q) { w } else { -w })
                            .sum::<f64>()
                    })
                    .sum();
                let f_ptm = (trace / d + 1.0) / (d + 1.0);
                assert!((average_gate_fidelity(&c) - f_ptm).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn json_round_trip_and_order() {
        let c = depolarizing_channel(1, 0.3).unwrap();
        let s = c.to_json();
        assert!(s.starts_with(r#"{"n":1,"terms":[{"pauli":"I","prob":0.69999999999999996}"#), "{s}");
        let back = PauliChannel::from_json(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn lexicographic_order() {
        let labels: Vec<String> = PauliString::all(2).map(|p| p.to_string()).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(labels, sorted);
        assert_eq!(labels[0], "II");
        assert_eq!(labels[15], "ZZ");
        assert!(ps("XZ") < ps("YI"));
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        let mask = (1u64 << n) - 1;
        (any::<u64>(), any::<u64>())
            .prop_map(move |(x, z)| PauliString::from_masks(n, x & mask, z & mask).unwrap())
    }

    fn arb_clifford(n: usize) -> impl Strategy<Value = CliffordMap> {
        prop::collection::vec((0u8..3, 0..n, 0..n), 0..30).prop_map(move |gates| {
            let mut c = CliffordMap::identity(n);
            for (kind, a, b) in gates {
                let g = match kind {
                    0 => CliffordMap::hadamard(n, a).unwrap(),
                    1 => CliffordMap::phase(n, a).unwrap(),
                    _ if a != b => CliffordMap::cz(n, a, b).unwrap(),
                    _ => continue,
                };
                c = c.then(&g).unwrap();
            }
            c
        })
    }

    fn arb_channel(n: usize) -> impl Strategy<Value = PauliChannel> {
        prop::collection::vec((arb_pauli(n), 0.0f64..1.0), 1..6).prop_map(move |terms| {
            let total: f64 = terms.iter().map(|t| t.1).sum::<f64>() + 1e-3;
            let mut v: Vec<_> = terms.into_iter().map(|(p, w)| (p, w / total)).collect();
            v.push((PauliString::identity(n), 1e-3 / total));
            PauliChannel::from_terms(n, v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn conjugation_preserves_commutation(p in arb_pauli(4), q in arb_pauli(4), c in arb_clifford(4)) {
            let cp = conjugate(&p, &c).unwrap();
            let cq = conjugate(&q, &c).unwrap();
            prop_assert_eq!(p.commutes_with(&q), cp.commutes_with(&cq));
        }

        #[test]
        fn conjugation_is_homomorphism(p in arb_pauli(3), q in arb_pauli(3), c in arb_clifford(3)) {
            let lhs = conjugate(&p.mul(&q).unwrap(), &c).unwrap();
            let rhs = conjugate(&p, &c).unwrap().mul(&conjugate(&q, &c).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn conjugated_hermitian_stays_hermitian(p in arb_pauli(3), c in arb_clifford(3)) {
            let img = conjugate_signed(&SignedPauli::new(p), &c).unwrap();
            prop_assert_eq!(img.phase % 2, 0);
        }

        #[test]
        fn compose_associative_commutative(a in arb_channel(2), b in arb_channel(2), c in arb_channel(2)) {
            let ab = compose(&a, &b).unwrap();
            let ba = compose(&b, &a).unwrap();
            let ab_c = compose(&ab, &c).unwrap();
            let a_bc = compose(&a, &compose(&b, &c).unwrap()).unwrap();
            for s in PauliString::all(2) {
                prop_assert!((ab.prob(&s) - ba.prob(&s)).abs() < 1e-14);
                prop_assert!((ab_c.prob(&s) - a_bc.prob(&s)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mass_conserved_over_random_chains() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n_total = 4;
            let mut acc = PauliChannel::identity(n_total);
            for _ in 0..rng.random_range(1..6) {
                let k = rng.random_range(1..=2);
                let p = rng.random::<f64>();
                let a = rng.random_range(0..n_total);
                let mut b = rng.random_range(0..n_total);
                while b == a {
                    b = rng.random_range(0..n_total);
                }
                let sites = if k == 1 { vec![a] } else { vec![a, b] };
                let local = depolarizing_channel(k, p).unwrap();
                acc = compose(&acc, &embed(&local, &sites, n_total).unwrap()).unwrap();
            }
            assert!((acc.total_mass() - 1.0).abs() < 1e-12);
            acc.validate().unwrap();
        }
    }
}

//! Discrete-variable measurement patterns and their effective logical noise.
//!
//! A [`MeasurementPattern`] is a cluster graph prepared by CZ gates on `|+>`
//! sites (inputs carry the logical state), followed by single-site
//! measurements on every non-output site. Physical Pauli faults are pushed
//! through the remaining CZs, turned into outcome flips at measured sites and
//! direct errors on output sites, and finally read out through the byproduct
//! frame as a logical Pauli. Collecting every fault location gives the
//! effective logical [`PauliChannel`] of the gate.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{check_probability, Error, Result};
use crate::pauli::{
    self, average_gate_fidelity, compose, conjugate, depolarizing_channel, CliffordMap, Pauli,
    PauliChannel, PauliString,
};

/// Single-site measurement basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementBasis {
    X,
    Y,
    Z,
    /// Equatorial basis `cos(theta) X + sin(theta) Y`.
    Plane(f64),
}

impl MeasurementBasis {
    /// The measured Pauli, if the basis is a Pauli basis.
    pub fn pauli(self) -> Option<Pauli> {
        match self {
            MeasurementBasis::X => Some(Pauli::X),
            MeasurementBasis::Y => Some(Pauli::Y),
            MeasurementBasis::Z => Some(Pauli::Z),
            MeasurementBasis::Plane(_) => None,
        }
    }

    // Equatorial measurements share the byproduct structure of X: the
    // adaptive sign choice absorbs the difference.
    fn frame_reference(self) -> Pauli {
        self.pauli().unwrap_or(Pauli::X)
    }

    /// A single-site Pauli that flips the outcome of this measurement.
    fn flip_operator(self) -> Pauli {
        match self.frame_reference() {
            Pauli::Z => Pauli::X,
            _ => Pauli::Z,
        }
    }
}

impl fmt::Display for MeasurementBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasurementBasis::X => write!(f, "X"),
            MeasurementBasis::Y => write!(f, "Y"),
            MeasurementBasis::Z => write!(f, "Z"),
            MeasurementBasis::Plane(t) => write!(f, "XY({t})"),
        }
    }
}

/// Logical gates with a standard measurement pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Hadamard,
    Cnot,
    Cz,
    /// `Rz(theta) = diag(e^{-i theta/2}, e^{i theta/2})`.
    Rotation(f64),
}

impl Gate {
    pub fn num_qubits(&self) -> usize {
        match self {
            Gate::Hadamard | Gate::Rotation(_) => 1,
            Gate::Cnot | Gate::Cz => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::Hadamard => "hadamard",
            Gate::Cnot => "cnot",
            Gate::Cz => "cz",
            Gate::Rotation(_) => "rotation",
        }
    }

    /// Unsigned Clifford action on Paulis, `None` for non-Clifford rotations.
    pub fn clifford(&self) -> Option<CliffordMap> {
        Some(match *self {
            Gate::Hadamard => CliffordMap::hadamard(1, 0).expect("valid"),
            Gate::Cnot => CliffordMap::cnot(2, 0, 1).expect("valid"),
            Gate::Cz => CliffordMap::cz(2, 0, 1).expect("valid"),
            Gate::Rotation(t) if t == 0.0 => CliffordMap::identity(1),
            Gate::Rotation(_) => return None,
        })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Rotation(t) => write!(f, "rotation({t})"),
            g => write!(f, "{}", g.name()),
        }
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "hadamard" | "h" => Ok(Gate::Hadamard),
            "cnot" | "cx" => Ok(Gate::Cnot),
            "cz" => Ok(Gate::Cz),
            _ => {
                let inner = lower
                    .strip_prefix("rotation(")
                    .or_else(|| lower.strip_prefix("rz("))
                    .and_then(|r| r.strip_suffix(')'));
                match inner.map(str::parse::<f64>) {
                    Some(Ok(t)) if t.is_finite() => Ok(Gate::Rotation(t)),
                    _ => Err(Error::InvalidArgument(format!("unsupported gate {s:?}"))),
                }
            }
        }
    }
}

/// A cluster graph plus measurement schedule implementing one logical gate.
#[derive(Debug, Clone)]
pub struct MeasurementPattern {
    target: Gate,
    n_sites: usize,
    /// CZ schedule; also the graph's edge list.
    edges: Vec<(usize, usize)>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    bases: Vec<Option<MeasurementBasis>>,
    byproduct_frame: Vec<Option<PauliString>>,
    // suffix[k] = product of CZs k.. in schedule order
    suffix: Vec<CliffordMap>,
    solver: FrameSolver,
}

/// Where a physical fault can occur.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorLocation {
    pub kind: LocationKind,
    pub sites: Vec<usize>,
    pub order_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    /// Right after the CZ with index `order_index` in the schedule.
    CzGate,
    /// Right before measuring the site; `order_index` counts from the end of
    /// the CZ schedule.
    Measurement,
}

impl MeasurementPattern {
    /// Builds a pattern from raw parts and derives its byproduct frame.
    ///
    /// Only the patterns returned by [`standard_pattern`] are supported API;
    /// this constructor exists for tests and experiments.
    pub fn from_parts(
        target: Gate,
        n_sites: usize,
        edges: Vec<(usize, usize)>,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        bases: Vec<Option<MeasurementBasis>>,
    ) -> Result<Self> {
        if n_sites > pauli::MAX_QUBITS {
            return Err(Error::UnsupportedQubitCount(n_sites));
        }
        pauli::check_sites(&inputs, n_sites)?;
        pauli::check_sites(&outputs, n_sites)?;
        if bases.len() != n_sites {
            return Err(Error::DimensionMismatch { expected: n_sites, found: bases.len() });
        }
        for (site, b) in bases.iter().enumerate() {
            if outputs.contains(&site) != b.is_none() {
                return Err(Error::InvalidPattern(format!(
                    "site {site}: outputs must be unmeasured and all other sites measured"
                )));
            }
        }
        for (i, &(a, b)) in edges.iter().enumerate() {
            pauli::check_sites(&[a, b], n_sites)?;
            if edges[..i].iter().any(|&(c, d)| (c, d) == (a, b) || (c, d) == (b, a)) {
                return Err(Error::InvalidPattern(format!("duplicate edge ({a}, {b})")));
            }
        }

        let mut suffix = vec![CliffordMap::identity(n_sites)];
        for &(a, b) in edges.iter().rev() {
            let cz = CliffordMap::cz(n_sites, a, b)?;
            let next = cz.then(suffix.last().expect("non-empty"))?;
            suffix.push(next);
        }
        suffix.reverse();

        let solver = FrameSolver::new(n_sites, &edges, &inputs, &outputs, &bases)?;
        let byproduct_frame = bases
            .iter()
            .enumerate()
            .map(|(site, b)| {
                b.map(|b| {
                    let flip = PauliString::single(n_sites, site, b.flip_operator())?;
                    solver.readout(&flip)
                })
                .transpose()
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(MeasurementPattern {
            target,
            n_sites,
            edges,
            inputs,
            outputs,
            bases,
            byproduct_frame,
            suffix,
            solver,
        })
    }

    pub fn target_gate(&self) -> Gate {
        self.target
    }

    pub fn num_sites(&self) -> usize {
        self.n_sites
    }

    pub fn num_logical(&self) -> usize {
        self.outputs.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn basis(&self, site: usize) -> Option<MeasurementBasis> {
        self.bases[site]
    }

    /// Measured sites in increasing order.
    pub fn measured_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_sites).filter(|&s| self.bases[s].is_some())
    }

    /// Logical Pauli toggled on the outputs when the outcome at `site` flips.
    pub fn byproduct_frame(&self, site: usize) -> Option<&PauliString> {
        self.byproduct_frame[site].as_ref()
    }

    pub fn neighbors(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == site {
                Some(b)
            } else if b == site {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn has_non_pauli_basis(&self) -> bool {
        self.bases.iter().flatten().any(|b| b.pauli().is_none())
    }

    /// The same graph with every equatorial measurement replaced by `X`: the
    /// Clifford skeleton that carries a rotation.
    pub fn clifford_carrier(&self) -> MeasurementPattern {
        let mut carrier = self.clone();
        for b in carrier.bases.iter_mut().flatten() {
            if b.pauli().is_none() {
                *b = MeasurementBasis::X;
            }
        }
        if let Gate::Rotation(_) = carrier.target {
            carrier.target = Gate::Rotation(0.0);
        }
        carrier
    }

    /// Unsigned images of the logical generators `X_q`, `Z_q` under the
    /// pattern's noiseless action (Pauli byproducts are invisible here).
    pub fn logical_action(&self) -> Result<CliffordMap> {
        if self.has_non_pauli_basis() {
            return Err(Error::NonPauliBasis(self.target.to_string()));
        }
        let full = &self.suffix[0];
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for &input in &self.inputs {
            for (p, out) in [(Pauli::X, &mut xs), (Pauli::Z, &mut zs)] {
                let op = PauliString::single(self.n_sites, input, p)?;
                let spread = conjugate(&op, full)?;
                out.push(pauli::SignedPauli::new(self.solver.readout(&spread)?));
            }
        }
        CliffordMap::from_images(xs, zs)
    }

    fn check_pauli_only(&self) -> Result<()> {
        if self.has_non_pauli_basis() {
            Err(Error::NonPauliBasis(self.target.to_string()))
        } else {
            Ok(())
        }
    }

    /// Maps a pattern-wide Pauli present after the first `applied_edges` CZs
    /// to the logical Pauli it induces on the outputs.
    pub fn propagate_from(&self, applied_edges: usize, e: &PauliString) -> Result<PauliString> {
        if e.num_qubits() != self.n_sites {
            return Err(Error::DimensionMismatch { expected: self.n_sites, found: e.num_qubits() });
        }
        if applied_edges > self.edges.len() {
            return Err(Error::LocationMismatch(format!(
                "schedule position {applied_edges} beyond {} edges",
                self.edges.len()
            )));
        }
        self.check_pauli_only()?;
        let fin = conjugate(e, &self.suffix[applied_edges])?;
        let mut logical = fin.restrict(&self.outputs);
        for site in self.measured_sites() {
            let basis = self.bases[site].expect("measured").pauli().expect("pauli basis");
            if !fin.get(site).commutes_with(basis) {
                let frame = self.byproduct_frame[site].as_ref().expect("measured");
                logical = logical.mul(frame)?;
            }
        }
        Ok(logical)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct PatternJson {
            target_gate: String,
            sites: usize,
            edges: Vec<[usize; 2]>,
            inputs: Vec<usize>,
            outputs: Vec<usize>,
            bases: Vec<Option<String>>,
            byproduct_frame: Vec<Option<String>>,
        }
        let json = PatternJson {
            target_gate: self.target.to_string(),
            sites: self.n_sites,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            bases: self.bases.iter().map(|b| b.map(|b| b.to_string())).collect(),
            byproduct_frame: self
                .byproduct_frame
                .iter()
                .map(|f| f.map(|f| f.to_string()))
                .collect(),
        };
        serde_json::to_string(&json).expect("pattern serializes")
    }
}

/// Rewrites a Pauli acting on the prepared cluster into an equivalent one that
/// commutes with every measurement, by multiplying in cluster stabilizers
/// `K_j = X_j prod_{k ~ j} Z_k` of non-input sites, and reads off its output
/// part. Linear algebra over GF(2).
#[derive(Debug, Clone)]
struct FrameSolver {
    measured: Vec<(usize, Pauli)>,
    outputs: Vec<usize>,
    generators: Vec<PauliString>,
}

impl FrameSolver {
    fn new(
        n_sites: usize,
        edges: &[(usize, usize)],
        inputs: &[usize],
        outputs: &[usize],
        bases: &[Option<MeasurementBasis>],
    ) -> Result<Self> {
        let generators: Vec<PauliString> = (0..n_sites)
            .filter(|s| !inputs.contains(s))
            .map(|j| {
                let mut k = PauliString::single(n_sites, j, Pauli::X)?;
                for &(a, b) in edges {
                    if a == j {
                        k.set(b, Pauli::Z);
                    } else if b == j {
                        k.set(a, Pauli::Z);
                    }
                }
                Ok(k)
            })
            .collect::<Result<_>>()?;
        if generators.len() > 64 {
            return Err(Error::UnsupportedQubitCount(generators.len()));
        }
        let measured = bases
            .iter()
            .enumerate()
            .filter_map(|(s, b)| b.map(|b| (s, b.frame_reference())))
            .collect();
        Ok(FrameSolver { measured, outputs: outputs.to_vec(), generators })
    }

    fn readout(&self, f: &PauliString) -> Result<PauliString> {
        if self.outputs.is_empty() {
            return Ok(PauliString::identity(0));
        }
        // row: (generators anticommuting with the measurement, does f?)
        let mut rows: Vec<(u64, bool)> = self
            .measured
            .iter()
            .map(|&(site, m)| {
                let mut bits = 0u64;
                for (j, g) in self.generators.iter().enumerate() {
                    if !g.get(site).commutes_with(m) {
                        bits |= 1 << j;
                    }
                }
                (bits, !f.get(site).commutes_with(m))
            })
            .collect();
        let mut pivots = Vec::new();
        let mut next = 0;
        for col in 0..self.generators.len() {
            let Some(found) = (next..rows.len()).find(|&r| rows[r].0 >> col & 1 == 1) else {
                continue;
            };
            rows.swap(next, found);
            let pivot = rows[next];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != next && row.0 >> col & 1 == 1 {
                    row.0 ^= pivot.0;
                    row.1 ^= pivot.1;
                }
            }
            pivots.push(col);
            next += 1;
        }
        if rows[next..].iter().any(|r| r.1) {
            return Err(Error::InvalidPattern(format!(
                "{f} cannot be moved off the measured sites"
            )));
        }
        let mut g = *f;
        for (r, &col) in pivots.iter().enumerate() {
            if rows[r].1 {
                g = g.mul(&self.generators[col])?;
            }
        }
        Ok(g.restrict(&self.outputs))
    }
}

/// The canonical pattern for `gate`.
///
/// Single-qubit gates use a five-site wire (four measured sites and the
/// output). The CNOT is the fifteen-site nearest-neighbour layout: a
/// seven-site control wire and a seven-site target wire joined through one
/// bridge site at their fourth sites.
pub fn standard_pattern(gate: Gate) -> Result<MeasurementPattern> {
    use MeasurementBasis::{Plane, X, Y};
    let wire = |len: usize, offset: usize| -> Vec<(usize, usize)> {
        (0..len - 1).map(|i| (offset + i, offset + i + 1)).collect()
    };
    match gate {
        Gate::Hadamard => MeasurementPattern::from_parts(
            gate,
            5,
            wire(5, 0),
            vec![0],
            vec![4],
            vec![Some(X), Some(Y), Some(Y), Some(Y), None],
        ),
        Gate::Rotation(theta) => {
            if !theta.is_finite() {
                return Err(Error::InvalidArgument(format!("rotation angle {theta}")));
            }
            // J(a) = H Rz(-a) per equatorial measurement; H H Rz(theta) H H.
            let middle = if theta == 0.0 { X } else { Plane(-theta) };
            MeasurementPattern::from_parts(
                gate,
                5,
                wire(5, 0),
                vec![0],
                vec![4],
                vec![Some(X), Some(X), Some(middle), Some(X), None],
            )
        }
        Gate::Cz => {
            // two identity wires (H H) coupled at their outputs
            let mut edges = vec![(0, 1), (3, 4), (1, 2), (4, 5)];
            edges.push((2, 5));
            MeasurementPattern::from_parts(
                gate,
                6,
                edges,
                vec![0, 3],
                vec![2, 5],
                vec![Some(X), Some(X), None, Some(X), Some(X), None],
            )
        }
        Gate::Cnot => {
            // control 0..=6, bridge 7, target 8..=14; column-by-column schedule
            let edges = vec![
                (0, 1),
                (8, 9),
                (1, 2),
                (9, 10),
                (2, 3),
                (10, 11),
                (3, 7),
                (7, 11),
                (3, 4),
                (11, 12),
                (4, 5),
                (12, 13),
                (5, 6),
                (13, 14),
            ];
            let mut bases = vec![None; 15];
            for (site, b) in [
                (0, X),
                (1, Y),
                (2, Y),
                (3, Y),
                (4, Y),
                (5, Y),
                (7, Y),
                (8, X),
                (9, X),
                (10, X),
                (11, Y),
                (12, X),
                (13, X),
            ] {
                bases[site] = Some(b);
            }
            MeasurementPattern::from_parts(gate, 15, edges, vec![0, 8], vec![6, 14], bases)
        }
    }
}

/// Fault locations in schedule order: every CZ, then every measurement.
pub fn enumerate_locations(p: &MeasurementPattern) -> Vec<ErrorLocation> {
    let cz = p.edges.iter().enumerate().map(|(i, &(a, b))| ErrorLocation {
        kind: LocationKind::CzGate,
        sites: vec![a, b],
        order_index: i,
    });
    let meas = p.measured_sites().enumerate().map(|(i, s)| ErrorLocation {
        kind: LocationKind::Measurement,
        sites: vec![s],
        order_index: p.edges.len() + i,
    });
    cz.chain(meas).collect()
}

/// Logical Pauli induced by the pattern-wide fault `e` at `loc`.
pub fn propagate_error(
    p: &MeasurementPattern,
    loc: &ErrorLocation,
    e: &PauliString,
) -> Result<PauliString> {
    let applied = match loc.kind {
        LocationKind::CzGate => {
            let edge = p.edges.get(loc.order_index).copied();
            match (edge, loc.sites.as_slice()) {
                (Some((a, b)), &[s, t]) if (a, b) == (s, t) || (a, b) == (t, s) => {
                    loc.order_index + 1
                }
                _ => return Err(Error::LocationMismatch(format!("{loc:?}"))),
            }
        }
        LocationKind::Measurement => match loc.sites.as_slice() {
            &[s] if s < p.n_sites && p.bases[s].is_some() => p.edges.len(),
            _ => return Err(Error::LocationMismatch(format!("{loc:?}"))),
        },
    };
    if e.num_qubits() != p.n_sites {
        return Err(Error::DimensionMismatch { expected: p.n_sites, found: e.num_qubits() });
    }
    let outside = (0..p.n_sites).any(|q| !loc.sites.contains(&q) && e.get(q) != Pauli::I);
    if outside {
        return Err(Error::LocationMismatch(format!("{e} not supported on {:?}", loc.sites)));
    }
    p.propagate_from(applied, e)
}

/// Effective logical channel of `p` under depolarizing CZ noise (`p_cz`, two
/// qubit) and depolarizing measurement noise (`p_m`, one qubit).
pub fn effective_channel_dv(p: &MeasurementPattern, p_cz: f64, p_m: f64) -> Result<PauliChannel> {
    check_probability("p_cz", p_cz)?;
    check_probability("p_m", p_m)?;
    p.check_pauli_only()?;
    let cz_local = depolarizing_channel(2, p_cz)?;
    let meas_local = depolarizing_channel(1, p_m)?;
    let mut acc = PauliChannel::identity(p.num_logical());
    for loc in enumerate_locations(p) {
        let local = match loc.kind {
            LocationKind::CzGate => &cz_local,
            LocationKind::Measurement => &meas_local,
        };
        let logical = local.map_paulis(p.num_logical(), |e| {
            propagate_error(p, &loc, &e.embed(&loc.sites, p.n_sites)?)
        })?;
        acc = compose(&acc, &logical)?;
    }
    Ok(acc)
}

/// The three noise assignments of the DV fidelity study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCase {
    /// `p_m = p`, `p_cz = 0`.
    Measurement,
    /// `p_m = 0`, `p_cz = p`.
    Cz,
    /// `p_m = p_cz = p`.
    Both,
}

impl NoiseCase {
    pub const ALL: [NoiseCase; 3] = [NoiseCase::Measurement, NoiseCase::Cz, NoiseCase::Both];

    pub fn rates(self, p: f64) -> (f64, f64) {
        match self {
            NoiseCase::Measurement => (0.0, p),
            NoiseCase::Cz => (p, 0.0),
            NoiseCase::Both => (p, p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseCase::Measurement => "meas",
            NoiseCase::Cz => "cz",
            NoiseCase::Both => "both",
        }
    }
}

impl FromStr for NoiseCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "meas" => Ok(NoiseCase::Measurement),
            "2" | "cz" => Ok(NoiseCase::Cz),
            "3" | "both" => Ok(NoiseCase::Both),
            _ => Err(Error::InvalidArgument(format!("unknown noise case {s:?}"))),
        }
    }
}

/// Average gate fidelity of `gate` along `p_grid` under `case`.
pub fn fidelity_curve(gate: Gate, case: NoiseCase, p_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let pattern = standard_pattern(gate)?;
    crate::exec::try_map(p_grid, |&p| {
        let (p_cz, p_m) = case.rates(p);
        let c = effective_channel_dv(&pattern, p_cz, p_m)?;
        Ok((p, average_gate_fidelity(&c)))
    })
}

//! GKP-encoded cluster states under the twirling approximation.
//!
//! Every finitely squeezed GKP qubit is an ideal code state followed by a
//! Gaussian displacement of variance `sigma^2 = 10^(-s/10) / 2` in both
//! quadratures. CZ gates `exp(-i x_j x_k)` shear the displacement covariance
//! and may add their own correlated noise; an inefficient homodyne detector
//! adds `(1 - eta) / (2 eta)` to the measured quadrature. A measured shift that
//! rounds to an odd multiple of `sqrt(pi)` flips the logical outcome.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec;
use crate::mbqc::{standard_pattern, Gate, MeasurementBasis, MeasurementPattern};
use crate::pauli::{
    average_gate_infidelity, compose, depolarizing_channel, PauliChannel, PauliString,
};
use crate::rng::task_rng;

/// Default truncation tolerance of the flip-probability series.
pub const SERIES_TOL: f64 = 1e-18;

/// Smallest eigenvalue a covariance may have before it counts as indefinite.
pub const PSD_TOL: f64 = -1e-10;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Displacement variance of a state squeezed by `s` dB.
pub fn db_to_variance(s: f64) -> f64 {
    10f64.powf(-s / 10.0) / 2.0
}

/// Extra quadrature variance of a homodyne detector with efficiency `eta`.
pub fn homodyne_variance(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidEfficiency(eta));
    }
    Ok((1.0 - eta) / (2.0 * eta))
}

/// Depolarizing rate model of the non-Clifford `U_Z(theta)` implementation:
/// `p_rot = clamp(c0 + c1 * 10^(-s_gkp/10), 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationModel {
    pub c0: f64,
    pub c1: f64,
}

impl RotationModel {
    /// Calibrated so that width-10 quantum volume at `eta = 0.95` first
    /// passes near 22 dB with matched CZ noise and near 18 dB without.
    pub const DEFAULT: RotationModel = RotationModel { c0: 4.0e-4, c1: 2.0e-3 };

    pub fn rate(&self, s_gkp_db: f64) -> f64 {
        (self.c0 + self.c1 * 10f64.powf(-s_gkp_db / 10.0)).clamp(0.0, 1.0)
    }
}

impl Default for RotationModel {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// How per-site flips are combined into a logical channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelMode {
    /// Independent flips from marginal variances, exact series.
    #[default]
    Analytic,
    /// Monte Carlo over correlated shift vectors drawn from the full covariance.
    Sampled { samples: u64, seed: u64 },
}

/// CZ-noise setting of a squeezing sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzMode {
    /// `s_cz = s_gkp`.
    Matched,
    /// `sigma^2_cz = 0`.
    Off,
}

impl CzMode {
    pub const ALL: [CzMode; 2] = [CzMode::Matched, CzMode::Off];

    pub fn name(self) -> &'static str {
        match self {
            CzMode::Matched => "matched",
            CzMode::Off => "off",
        }
    }
}

impl fmt::Display for CzMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CzMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "matched" | "s_cz=s_gkp" => Ok(CzMode::Matched),
            "off" | "none" | "0" => Ok(CzMode::Off),
            _ => Err(Error::InvalidArgument(format!("unknown cz mode {s:?} (matched|off)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkpNoiseParams {
    pub s_gkp_db: f64,
    /// CZ displacement variance `kappa / g`.
    pub sigma2_cz: f64,
    pub eta: f64,
    /// Cross-covariance coefficient between `x` of one CZ partner and `p` of
    /// the other, in units of `sigma2_cz`; `|xcov| <= 1`.
    pub xcov: f64,
    pub rotation: RotationModel,
    pub mode: ChannelMode,
    pub series_tol: f64,
}

impl GkpNoiseParams {
    /// Noiseless CZs, default rotation model, analytic mode.
    pub fn new(s_gkp_db: f64, eta: f64) -> Result<Self> {
        let p = GkpNoiseParams {
            s_gkp_db,
            sigma2_cz: 0.0,
            eta,
            xcov: 0.0,
            rotation: RotationModel::DEFAULT,
            mode: ChannelMode::Analytic,
            series_tol: SERIES_TOL,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_cz_db(mut self, s_cz_db: f64) -> Result<Self> {
        self.sigma2_cz = db_to_variance(s_cz_db);
        self.validate()?;
        Ok(self)
    }

    pub fn with_cz_mode(self, mode: CzMode) -> Result<Self> {
        match mode {
            CzMode::Matched => self.with_cz_db(self.s_gkp_db),
            CzMode::Off => Ok(GkpNoiseParams { sigma2_cz: 0.0, ..self }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s_gkp_db.is_finite() || self.s_gkp_db < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "s_gkp_db must be finite and >= 0, got {}",
                self.s_gkp_db
            )));
        }
        if !(self.sigma2_cz >= 0.0 && self.sigma2_cz.is_finite()) {
            return Err(Error::InvalidVariance(self.sigma2_cz));
        }
        homodyne_variance(self.eta)?;
        if !(self.xcov.abs() <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "xcov must satisfy |xcov| <= 1, got {}",
                self.xcov
            )));
        }
        if !(self.series_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "series tolerance must be positive, got {}",
                self.series_tol
            )));
        }
        if let ChannelMode::Sampled { samples: 0, .. } = self.mode {
            return Err(Error::InvalidArgument("sampled mode needs samples > 0".into()));
        }
        Ok(())
    }

    pub fn sigma2_gkp(&self) -> f64 {
        db_to_variance(self.s_gkp_db)
    }

    pub fn sigma2_m(&self) -> f64 {
        (1.0 - self.eta) / (2.0 * self.eta)
    }
}

/// Homodyne direction measured for each logical basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GkpMeasurementBasis {
    /// `p` homodyne.
    X,
    /// `x` homodyne.
    Z,
    /// `(x - p) / sqrt(2)` homodyne.
    Y,
    /// `U_Z(theta)`, then `p` homodyne.
    Plane(f64),
}

impl GkpMeasurementBasis {
    /// Unit vector `(u_x, u_p)`.
    pub fn direction(self) -> (f64, f64) {
        match self {
            GkpMeasurementBasis::X | GkpMeasurementBasis::Plane(_) => (0.0, 1.0),
            GkpMeasurementBasis::Z => (1.0, 0.0),
            GkpMeasurementBasis::Y => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        }
    }
}

impl From<MeasurementBasis> for GkpMeasurementBasis {
    fn from(b: MeasurementBasis) -> Self {
        match b {
            MeasurementBasis::X => GkpMeasurementBasis::X,
            MeasurementBasis::Y => GkpMeasurementBasis::Y,
            MeasurementBasis::Z => GkpMeasurementBasis::Z,
            MeasurementBasis::Plane(t) => GkpMeasurementBasis::Plane(t),
        }
    }
}

/// Covariance of Gaussian displacement errors, ordered `(x_1..x_N, p_1..p_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureNoise {
    n_modes: usize,
    cov: DMatrix<f64>,
}

impl QuadratureNoise {
    pub fn from_cov(cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() % 2 != 0 {
            return Err(Error::DimensionMismatch { expected: cov.ncols(), found: cov.nrows() });
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::InvalidArgument(format!("covariance asymmetric by {asym:e}")));
        }
        let noise = QuadratureNoise { n_modes: cov.nrows() / 2, cov };
        noise.check_psd()?;
        Ok(noise)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn x_index(&self, mode: usize) -> usize {
        mode
    }

    pub fn p_index(&self, mode: usize) -> usize {
        self.n_modes + mode
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.n_modes == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.cov.clone()).eigenvalues.min()
    }

    fn check_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < PSD_TOL {
            Err(Error::NotPositiveSemidefinite(min))
        } else {
            Ok(())
        }
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange { site: mode, n: self.n_modes })
        }
    }

    /// Applies `CZ_{jk} = exp(-i x_j x_k)` followed by its displacement noise.
    ///
    /// The gate leaves `x` alone and sends `p_j -> p_j - x_k`,
    /// `p_k -> p_k - x_j`. The noise adds `sigma2_cz` to all four quadratures
    /// of the pair plus `xcov * sigma2_cz` to `cov(x_j, p_k)` and
    /// `cov(x_k, p_j)`.
    pub fn apply_cz(&mut self, j: usize, k: usize, sigma2_cz: f64, xcov: f64) -> Result<()> {
        self.apply_cz_signed(j, k, sigma2_cz, xcov, -1.0)
    }

    pub(crate) fn apply_cz_signed(
        &mut self,
        j: usize,
        k: usize,
        sigma2_cz: f64,
        xcov: f64,
        sign: f64,
    ) -> Result<()> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        if j == k {
            return Err(Error::SiteCollision(j));
        }
        if !(sigma2_cz >= 0.0 && sigma2_cz.is_finite()) {
            return Err(Error::InvalidVariance(sigma2_cz));
        }
        let (xj, xk, pj, pk) = (self.x_index(j), self.x_index(k), self.p_index(j), self.p_index(k));
        // S = I + sign (e_pj e_xk^T + e_pk e_xj^T); rows then columns.
        let dim = self.cov.nrows();
        for c in 0..dim {
            let (a, b) = (self.cov[(xk, c)], self.cov[(xj, c)]);
            self.cov[(pj, c)] += sign * a;
            self.cov[(pk, c)] += sign * b;
        }
        for r in 0..dim {
            let (a, b) = (self.cov[(r, xk)], self.cov[(r, xj)]);
            self.cov[(r, pj)] += sign * a;
            self.cov[(r, pk)] += sign * b;
        }

        for idx in [xj, xk, pj, pk] {
            self.cov[(idx, idx)] += sigma2_cz;
        }
        let c = xcov * sigma2_cz;
        for (a, b) in [(xj, pk), (xk, pj)] {
            self.cov[(a, b)] += c;
            self.cov[(b, a)] += c;
        }
        self.check_psd()
    }

    /// Variance of the homodyne record of `mode` in `basis`, including the
    /// detector's own noise.
    pub fn measured_variance(&self, mode: usize, basis: GkpMeasurementBasis, eta: f64) -> Result<f64> {
        self.check_mode(mode)?;
        let sigma2_m = homodyne_variance(eta)?;
        let (ux, up) = basis.direction();
        let (x, p) = (self.x_index(mode), self.p_index(mode));
        let c = &self.cov;
        Ok(ux * ux * c[(x, x)] + 2.0 * ux * up * c[(x, p)] + up * up * c[(p, p)] + sigma2_m)
    }
}

/// Every GKP qubit displaced independently by `sigma2_gkp` in `x` and `p`.
pub fn init_cluster_noise(n_modes: usize, sigma2_gkp: f64) -> Result<QuadratureNoise> {
    if !(sigma2_gkp >= 0.0 && sigma2_gkp.is_finite()) {
        return Err(Error::InvalidVariance(sigma2_gkp));
    }
    Ok(QuadratureNoise {
        n_modes,
        cov: DMatrix::identity(2 * n_modes, 2 * n_modes) * sigma2_gkp,
    })
}

/// Probability that an `N(0, variance)` shift rounds to an odd multiple of
/// `sqrt(pi)`.
pub fn flip_probability(variance: f64) -> Result<f64> {
    flip_probability_with_tol(variance, SERIES_TOL)
}

pub fn flip_probability_with_tol(variance: f64, tol: f64) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(Error::InvalidVariance(variance));
    }
    if variance == 0.0 {
        return Ok(0.0);
    }
    if variance.is_infinite() {
        return Ok(0.5);
    }
    let p = if variance <= 1.0 {
        flip_series_direct(variance, tol)
    } else {
        flip_series_fourier(variance, tol)
    };
    Ok(p.clamp(0.0, 0.5))
}

// Sum over odd bins on both sides of the origin.
fn flip_series_direct(variance: f64, tol: f64) -> f64 {
    let a = SQRT_PI / variance.sqrt() / SQRT_2;
    let mut total = 0.0;
    let mut n = 1.0;
    loop {
        let term = libm::erfc((n - 0.5) * a) - libm::erfc((n + 0.5) * a);
        total += term;
        if term < tol {
            return total;
        }
        n += 2.0;
    }
}

// Fourier series of the odd-bin indicator, fast when the Gaussian is wide.
fn flip_series_fourier(variance: f64, tol: f64) -> f64 {
    let mut total = 0.5;
    let mut m = 1.0f64;
    let mut sign = 1.0;
    loop {
        let term = 2.0 / PI / m * (-PI * m * m * variance / 2.0).exp();
        total -= sign * term;
        if term < tol {
            return total;
        }
        m += 2.0;
        sign = -sign;
    }
}

fn check_clifford(pattern: &MeasurementPattern) -> Result<()> {
    if pattern.has_non_pauli_basis() {
        Err(Error::NonPauliBasis(format!(
            "{} (use rotation_channel for XY-plane measurements)",
            pattern.target_gate()
        )))
    } else {
        Ok(())
    }
}

/// Quadrature noise of the pattern's cluster right before measurement.
pub fn cluster_noise(pattern: &MeasurementPattern, params: &GkpNoiseParams) -> Result<QuadratureNoise> {
    params.validate()?;
    let mut noise = init_cluster_noise(pattern.num_sites(), params.sigma2_gkp())?;
    for &(a, b) in pattern.edges() {
        noise.apply_cz(a, b, params.sigma2_cz, params.xcov)?;
    }
    Ok(noise)
}

/// Flip probability of every measured site, in site order.
pub fn site_flip_probabilities(
    pattern: &MeasurementPattern,
    params: &GkpNoiseParams,
) -> Result<Vec<(usize, f64)>> {
    let noise = cluster_noise(pattern, params)?;
    pattern
        .measured_sites()
        .map(|site| {
            let basis = pattern.basis(site).expect("measured").into();
            let var = noise.measured_variance(site, basis, params.eta)?;
            Ok((site, flip_probability_with_tol(var, params.series_tol)?))
        })
        .collect()
}

/// Effective logical channel of a Clifford pattern built from GKP qubits.
pub fn effective_channel_gkp(pattern: &MeasurementPattern, params: &GkpNoiseParams) -> Result<PauliChannel> {
    check_clifford(pattern)?;
    match params.mode {
        ChannelMode::Analytic => {
            let mut acc = PauliChannel::identity(pattern.num_logical());
            for (site, p) in site_flip_probabilities(pattern, params)? {
                let frame = *pattern.byproduct_frame(site).expect("measured");
                acc = compose(&acc, &PauliChannel::bernoulli(frame, p)?)?;
            }
            Ok(acc)
        }
        ChannelMode::Sampled { samples, seed } => sampled_channel(pattern, params, samples, seed),
    }
}

const SAMPLE_CHUNK: u64 = 1 << 16;

fn sampled_channel(
    pattern: &MeasurementPattern,
    params: &GkpNoiseParams,
    samples: u64,
    seed: u64,
) -> Result<PauliChannel> {
    let noise = cluster_noise(pattern, params)?;
    let sites: Vec<usize> = pattern.measured_sites().collect();
    let m = sites.len();
    // covariance of the measured quadratures, detector noise included
    let mut u = DMatrix::zeros(2 * noise.n_modes(), m);
    for (col, &site) in sites.iter().enumerate() {
        let (ux, up) = GkpMeasurementBasis::from(pattern.basis(site).expect("measured")).direction();
        u[(noise.x_index(site), col)] = ux;
        u[(noise.p_index(site), col)] = up;
    }
    let cy = u.transpose() * noise.cov() * &u + DMatrix::identity(m, m) * params.sigma2_m();
    let eig = SymmetricEigen::new(cy);
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
    let frames: Vec<PauliString> = sites
        .iter()
        .map(|&s| *pattern.byproduct_frame(s).expect("measured"))
        .collect();
    let n_logical = pattern.num_logical();

    let chunks: Vec<u64> = (0..samples.div_ceil(SAMPLE_CHUNK)).collect();
    let counts = exec::map(&chunks, |&chunk| {
        let mut rng = task_rng(seed, "gkp-sampled", &[chunk]);
        let len = SAMPLE_CHUNK.min(samples - chunk * SAMPLE_CHUNK);
        let mut hist: BTreeMap<PauliString, u64> = BTreeMap::new();
        let mut z = vec![0.0; m];
        for _ in 0..len {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let mut logical = PauliString::identity(n_logical);
            for (row, frame) in frames.iter().enumerate() {
                let y: f64 = (0..m).map(|c| factor[(row, c)] * z[c]).sum();
                if ((y / SQRT_PI).round() as i64).rem_euclid(2) == 1 {
                    logical = logical.mul(frame).expect("same width");
                }
            }
            *hist.entry(logical).or_insert(0) += 1;
        }
        hist
    });
    let mut total: BTreeMap<PauliString, u64> = BTreeMap::new();
    for hist in counts {
        for (k, v) in hist {
            *total.entry(k).or_insert(0) += v;
        }
    }
    let n = samples as f64;
    PauliChannel::from_terms(n_logical, total.into_iter().map(|(k, v)| (k, v as f64 / n)))
}

/// Depolarizing rate attached to a logical `U_Z(theta)`; the model does not
/// depend on the angle.
pub fn rotation_error_rate(_theta: f64, params: &GkpNoiseParams) -> f64 {
    params.rotation.rate(params.s_gkp_db)
}

/// Logical channel of `U_Z(theta)`: the rotation's depolarizing error composed
/// with the measurement channel of its Clifford carrier wire.
pub fn rotation_channel(theta: f64, params: &GkpNoiseParams) -> Result<PauliChannel> {
    let wire = standard_pattern(Gate::Rotation(theta))?.clifford_carrier();
    let carrier = effective_channel_gkp(&wire, params)?;
    compose(&depolarizing_channel(1, rotation_error_rate(theta, params))?, &carrier)
}

/// `(s_gkp_db, infidelity)` along `s_grid`, other parameters from `base`.
pub fn infidelity_vs_squeezing(
    gate: Gate,
    base: &GkpNoiseParams,
    s_grid: &[f64],
    cz_mode: CzMode,
) -> Result<Vec<(f64, f64)>> {
    if matches!(gate, Gate::Rotation(_)) {
        return Err(Error::NonPauliBasis(gate.to_string()));
    }
    let pattern = standard_pattern(gate)?;
    exec::try_map(s_grid, |&s| {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("squeezing grid must be positive, got {s}")));
        }
        let params = GkpNoiseParams { s_gkp_db: s, ..*base }.with_cz_mode(cz_mode)?;
        Ok((s, average_gate_infidelity(&effective_channel_gkp(&pattern, &params)?)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbqc::Gate;
    use proptest::prelude::*;

    #[test]
    fn unit_conversions() {
        assert_eq!(db_to_variance(0.0), 0.5);
        assert!((db_to_variance(14.0) - 0.5 * 10f64.powf(-1.4)).abs() < 1e-18);
        assert!((db_to_variance(14.0) - 0.019905).abs() < 1e-6);
        assert!(db_to_variance(300.0) < 1e-30);
        assert_eq!(homodyne_variance(1.0).unwrap(), 0.0);
        assert!((homodyne_variance(0.95).unwrap() - 0.05 / 1.9).abs() < 1e-15);
        assert_eq!(homodyne_variance(0.5).unwrap(), 0.5);
        for bad in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(matches!(homodyne_variance(bad), Err(Error::InvalidEfficiency(_))));
        }
    }

    #[test]
    fn init_noise() {
        let z = init_cluster_noise(3, 0.0).unwrap();
        assert_eq!(z.cov(), &DMatrix::zeros(6, 6));
        let one = init_cluster_noise(1, 0.0199).unwrap();
        assert_eq!(one.cov(), &DMatrix::from_diagonal_element(2, 2, 0.0199));
        let two = init_cluster_noise(2, 0.3).unwrap();
        assert!((two.cov().trace() - 1.2).abs() < 1e-15);
        assert!(init_cluster_noise(2, -1.0).is_err());
    }

    fn cz_symplectic(n: usize, j: usize, k: usize, sign: f64) -> DMatrix<f64> {
        let mut s = DMatrix::identity(2 * n, 2 * n);
        s[(n + j, k)] = sign;
        s[(n + k, j)] = sign;
        s
    }

    #[test]
    fn cz_matches_explicit_congruence() {
        let mut noise = init_cluster_noise(3, 0.1).unwrap();
        noise.cov[(0, 4)] = 0.01;
        noise.cov[(4, 0)] = 0.01;
        let before = noise.cov.clone();
        noise.apply_cz(0, 2, 0.0, 0.0).unwrap();
        let s = cz_symplectic(3, 0, 2, -1.0);
        let expect = &s * before * s.transpose();
        assert!((noise.cov() - expect).amax() < 1e-15);
    }

    #[test]
    fn cz_noise_on_vacuum_is_additive_term() {
        let mut noise = init_cluster_noise(2, 0.0).unwrap();
        noise.apply_cz(0, 1, 0.2, 0.5).unwrap();
        let mut a = DMatrix::from_diagonal_element(4, 4, 0.2);
        a[(0, 3)] = 0.1;
        a[(3, 0)] = 0.1;
        a[(1, 2)] = 0.1;
        a[(2, 1)] = 0.1;
        assert_eq!(noise.cov(), &a);
    }

    #[test]
    fn cz_errors() {
        let mut noise = init_cluster_noise(2, 0.1).unwrap();
        assert!(matches!(noise.apply_cz(0, 0, 0.0, 0.0), Err(Error::SiteCollision(0))));
        assert!(noise.apply_cz(0, 2, 0.0, 0.0).is_err());
        let mut zero = init_cluster_noise(2, 0.0).unwrap();
        assert!(matches!(
            zero.apply_cz(0, 1, 0.2, 1.5),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn disjoint_czs_commute() {
        let mut a = init_cluster_noise(4, 0.05).unwrap();
        let mut b = a.clone();
        a.apply_cz(0, 1, 0.01, 0.3).unwrap();
        a.apply_cz(2, 3, 0.02, -0.2).unwrap();
        b.apply_cz(2, 3, 0.02, -0.2).unwrap();
        b.apply_cz(0, 1, 0.01, 0.3).unwrap();
        assert!((a.cov() - b.cov()).amax() < 1e-15);
    }

    #[test]
    fn cz_sign_does_not_change_measured_variances() {
        let pattern = standard_pattern(Gate::Cnot).unwrap();
        let mut minus = init_cluster_noise(pattern.num_sites(), 0.02).unwrap();
        let mut plus = minus.clone();
        for &(a, b) in pattern.edges() {
            minus.apply_cz_signed(a, b, 0.01, 0.0, -1.0).unwrap();
            plus.apply_cz_signed(a, b, 0.01, 0.0, 1.0).unwrap();
        }
        for site in pattern.measured_sites() {
            let basis = pattern.basis(site).unwrap().into();
            let a = minus.measured_variance(site, basis, 0.9).unwrap();
            let b = plus.measured_variance(site, basis, 0.9).unwrap();
            assert!((a - b).abs() < 1e-15, "site {site}: {a} vs {b}");
        }
    }

    #[test]
    fn measured_variance_examples() {
        let noise = init_cluster_noise(1, 0.03).unwrap();
        assert_eq!(noise.measured_variance(0, GkpMeasurementBasis::X, 1.0).unwrap(), 0.03);
        for basis in [GkpMeasurementBasis::X, GkpMeasurementBasis::Y, GkpMeasurementBasis::Z] {
            let v = noise.measured_variance(0, basis, 0.8).unwrap();
            assert!((v - (0.03 + 0.2 / 1.6)).abs() < 1e-15);
        }
        let mut cov = DMatrix::zeros(2, 2);
        cov[(0, 0)] = 0.3;
        cov[(1, 1)] = 0.1;
        cov[(0, 1)] = 0.05;
        cov[(1, 0)] = 0.05;
        let aniso = QuadratureNoise::from_cov(cov).unwrap();
        let y = aniso.measured_variance(0, GkpMeasurementBasis::Y, 1.0).unwrap();
        assert!((y - (0.3 + 0.1 - 2.0 * 0.05) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn flip_probability_limits() {
        assert_eq!(flip_probability(0.0).unwrap(), 0.0);
        assert_eq!(flip_probability(f64::INFINITY).unwrap(), 0.5);
        assert!((flip_probability(1e6).unwrap() - 0.5).abs() < 1e-15);
        assert!(flip_probability(1e-4).unwrap() < 1e-300);
        assert!(matches!(flip_probability(-1.0), Err(Error::InvalidVariance(_))));
    }

    #[test]
    fn series_forms_agree() {
        for &v in &[0.05, 0.2, 0.5, 0.8, 1.0, 1.5, 3.0] {
            let a = flip_series_direct(v, 1e-24);
            let b = flip_series_fourier(v, 1e-24);
            assert!((a - b).abs() < 1e-14, "variance {v}: {a} vs {b}");
        }
    }

    #[test]
    fn flip_probability_is_monotone() {
        let mut prev = 0.0;
        for i in 1..400 {
            let v = i as f64 * 0.01;
            let p = flip_probability(v).unwrap();
            assert!(p >= prev && p <= 0.5, "variance {v}");
            prev = p;
        }
    }

    #[test]
    fn noiseless_limit() {
        let params = GkpNoiseParams::new(60.0, 1.0).unwrap();
        for gate in [Gate::Hadamard, Gate::Cnot, Gate::Cz] {
            let c = effective_channel_gkp(&standard_pattern(gate).unwrap(), &params).unwrap();
            assert!(c.error_mass() < 1e-12);
            assert!((c.prob(&PauliString::identity(gate.num_qubits())) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_patterns_are_rejected() {
        let params = GkpNoiseParams::new(20.0, 1.0).unwrap();
        let r = standard_pattern(Gate::Rotation(0.4)).unwrap();
        assert!(matches!(effective_channel_gkp(&r, &params), Err(Error::NonPauliBasis(_))));
    }

    #[test]
    fn rotation_model() {
        let zero = GkpNoiseParams {
            rotation: RotationModel { c0: 0.0, c1: 0.0 },
            ..GkpNoiseParams::new(20.0, 1.0).unwrap()
        };
        assert_eq!(rotation_error_rate(0.3, &zero), 0.0);
        let m = RotationModel::DEFAULT;
        let mut prev = 1.0;
        for s in 0..60 {
            let r = m.rate(s as f64);
            assert!(r <= prev);
            prev = r;
        }
        assert_eq!(RotationModel { c0: 2.0, c1: 0.0 }.rate(10.0), 1.0);
        let params = GkpNoiseParams::new(22.0, 0.95).unwrap();
        let c = rotation_channel(0.3, &params).unwrap();
        c.validate().unwrap();
        assert!(c.error_mass() > rotation_error_rate(0.3, &params) * 0.5);
    }

    #[test]
    fn squeezing_improves_ideal_detector_fidelity() {
        let base = GkpNoiseParams::new(10.0, 1.0).unwrap();
        let grid: Vec<f64> = (6..=24).map(f64::from).collect();
        let series = infidelity_vs_squeezing(Gate::Hadamard, &base, &grid, CzMode::Matched).unwrap();
        for w in series.windows(2) {
            assert!(w[1].1 < w[0].1, "{w:?}");
        }
    }

    #[test]
    fn cnot_is_worse_than_hadamard() {
        let grid = [8.0, 12.0, 16.0, 20.0];
        for eta in [1.0, 0.95, 0.85] {
            let base = GkpNoiseParams::new(10.0, eta).unwrap();
            for mode in CzMode::ALL {
                let h = infidelity_vs_squeezing(Gate::Hadamard, &base, &grid, mode).unwrap();
                let c = infidelity_vs_squeezing(Gate::Cnot, &base, &grid, mode).unwrap();
                for (a, b) in h.iter().zip(&c) {
                    assert!(b.1 >= a.1, "eta {eta} {mode}: {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn series_tolerance_is_converged() {
        let grid = [6.0, 10.0, 15.0, 20.0];
        let base = GkpNoiseParams::new(10.0, 0.9).unwrap();
        let tight = GkpNoiseParams { series_tol: 1e-24, ..base };
        for gate in [Gate::Hadamard, Gate::Cnot] {
            let a = infidelity_vs_squeezing(gate, &base, &grid, CzMode::Matched).unwrap();
            let b = infidelity_vs_squeezing(gate, &tight, &grid, CzMode::Matched).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x.1 - y.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn detector_noise_is_additive() {
        let noise = init_cluster_noise(1, 0.04).unwrap();
        let v1 = noise.measured_variance(0, GkpMeasurementBasis::Z, 0.9).unwrap();
        let v0 = noise.measured_variance(0, GkpMeasurementBasis::Z, 1.0).unwrap();
        let m = homodyne_variance(0.9).unwrap();
        assert!((v1 - v0 - m).abs() < 1e-15);
    }

    #[test]
    fn sampled_mode_tracks_analytic() {
        let base = GkpNoiseParams::new(10.0, 0.95).unwrap().with_cz_db(10.0).unwrap();
        let sampled = GkpNoiseParams {
            mode: ChannelMode::Sampled { samples: 200_000, seed: 11 },
            ..base
        };
        let h = standard_pattern(Gate::Hadamard).unwrap();
        let a = average_gate_infidelity(&effective_channel_gkp(&h, &base).unwrap());
        let s = average_gate_infidelity(&effective_channel_gkp(&h, &sampled).unwrap());
        // correlations shift the answer only mildly
        assert!((a - s).abs() < 0.25 * a, "{a} vs {s}");
        let again = average_gate_infidelity(&effective_channel_gkp(&h, &sampled).unwrap());
        assert_eq!(s, again);
    }

    proptest! {
        #[test]
        fn covariance_stays_psd(
            ops in proptest::collection::vec((0usize..5, 0usize..5, 0.0f64..0.1, -1.0f64..=1.0), 1..30),
            var in 0.0f64..0.2,
        ) {
            let mut noise = init_cluster_noise(5, var).unwrap();
            for (j, k, s, xc) in ops {
                if j == k {
                    continue;
                }
                noise.apply_cz(j, k, s, xc).unwrap();
                let c = noise.cov();
                prop_assert!((c - c.transpose()).amax() < 1e-12);
                prop_assert!(noise.min_eigenvalue() >= PSD_TOL);
            }
        }
    }
}

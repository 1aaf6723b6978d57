//! Quantum volume on a noisy measurement-based machine.
//!
//! A width-`d` model circuit has `d` layers; each layer pairs up a uniformly
//! permuted register and applies a Haar SU(4) block to every pair. Blocks are
//! compiled to three CNOTs plus `H`/`Rz` sequences, every native gate being
//! followed by the effective logical channel of its measurement pattern. The
//! width passes when the noisy machine puts at least 2/3 of its output mass on
//! the heavy outputs of the ideal distribution.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Strategy;
use crate::fmt::{g17, G17};
use crate::gkp::{self, CzMode, GkpNoiseParams};
use crate::mbqc::{effective_channel_dv, standard_pattern, Gate};
use crate::pauli::PauliChannel;
use crate::rng::task_rng;
use crate::sim::{
    cnot, euler_zxz, haar_su4, hadamard, kak_decompose, rz, CompiledCircuit, LogicalCircuit,
    Mat4, NativeOp, StateVector,
};

/// Success threshold on the mean heavy-output probability.
pub const HEAVY_THRESHOLD: f64 = 2.0 / 3.0;

#[derive(Debug, Clone)]
pub struct Layer {
    /// Block `i` acts on `(permutation[2i], permutation[2i+1])`.
    pub permutation: Vec<usize>,
    pub blocks: Vec<Mat4>,
}

impl Layer {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.permutation.chunks_exact(2).map(|c| (c[0], c[1]))
    }
}

#[derive(Debug, Clone)]
pub struct ModelCircuit {
    d: usize,
    layers: Vec<Layer>,
}

impl ModelCircuit {
    pub fn width(&self) -> usize {
        self.d
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// The blocks as exact two-qubit unitaries.
    pub fn ideal_circuit(&self) -> LogicalCircuit {
        let mut c = LogicalCircuit::new(self.d);
        for layer in &self.layers {
            for ((a, b), u) in layer.pairs().zip(&layer.blocks) {
                c.push_2q(a, b, *u).expect("Haar blocks are unitary");
            }
        }
        c
    }

    /// Output distribution of the noiseless circuit on `|0...0>`.
    pub fn ideal_distribution(&self) -> Result<Vec<f64>> {
        let compiled = CompiledCircuit::new(&self.ideal_circuit())?;
        Ok(compiled.ideal_state(&StateVector::zero(self.d)?)?.probabilities())
    }
}

pub fn generate_model_circuit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<ModelCircuit> {
    if d < 2 {
        return Err(Error::InvalidWidth(d));
    }
    let layers = (0..d)
        .map(|_| {
            let mut permutation: Vec<usize> = (0..d).collect();
            permutation.shuffle(rng);
            let blocks = (0..d / 2).map(|_| haar_su4(rng)).collect();
            Layer { permutation, blocks }
        })
        .collect();
    Ok(ModelCircuit { d, layers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeavySet {
    /// Indices of the heavy outputs, increasing.
    pub outputs: Vec<usize>,
    pub p_med: f64,
}

impl HeavySet {
    pub fn mass(&self, probs: &[f64]) -> f64 {
        self.outputs.iter().map(|&i| probs[i]).sum()
    }
}

/// Outputs whose ideal probability strictly exceeds the median (midpoint of
/// the two central order statistics).
pub fn heavy_set(ideal: &[f64]) -> Result<HeavySet> {
    if ideal.len() < 2 || !ideal.len().is_power_of_two() {
        return Err(Error::InvalidDistribution(format!(
            "{} outcomes is not a power of two >= 2",
            ideal.len()
        )));
    }
    if let Some(bad) = ideal.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("negative or NaN probability {bad}")));
    }
    let total: f64 = ideal.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mut sorted = ideal.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half = sorted.len() / 2;
    let p_med = (sorted[half - 1] + sorted[half]) / 2.0;
    let outputs = (0..ideal.len()).filter(|&i| ideal[i] > p_med).collect();
    Ok(HeavySet { outputs, p_med })
}

/// How the machine's gates are corrupted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Noiseless,
    /// Depolarizing CZ (`p_cz`) and measurement (`p_m`) noise in DV patterns.
    Dv { p_cz: f64, p_m: f64 },
    Gkp(GkpNoiseParams),
    /// The machine's output replaced by the uniform distribution.
    Uniform,
}

impl NoiseModel {
    /// Parameter echo for run metadata.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        match self {
            NoiseModel::Noiseless => put("noise", "none".into()),
            NoiseModel::Uniform => put("noise", "uniform".into()),
            NoiseModel::Dv { p_cz, p_m } => {
                put("noise", "dv".into());
                put("p_cz", g17(*p_cz));
                put("p_m", g17(*p_m));
            }
            NoiseModel::Gkp(p) => {
                put("noise", "gkp".into());
                put("s_gkp_db", g17(p.s_gkp_db));
                put("sigma2_cz", g17(p.sigma2_cz));
                put("eta", g17(p.eta));
                put("xcov", g17(p.xcov));
                put("rot_c0", g17(p.rotation.c0));
                put("rot_c1", g17(p.rotation.c1));
                put("p_rot", g17(p.rotation.rate(p.s_gkp_db)));
                match p.mode {
                    gkp::ChannelMode::Analytic => put("gkp_mode", "analytic".into()),
                    gkp::ChannelMode::Sampled { samples, seed } => {
                        put("gkp_mode", "sampled".into());
                        put("gkp_samples", samples.to_string());
                        put("gkp_seed", seed.to_string());
                    }
                }
            }
        }
        m
    }
}

/// Effective logical channels of the native gate set.
#[derive(Debug, Clone)]
pub struct GateChannels {
    pub cnot: Arc<PauliChannel>,
    pub hadamard: Arc<PauliChannel>,
    pub rz: Arc<PauliChannel>,
}

impl GateChannels {
    pub fn ideal() -> Self {
        GateChannels {
            cnot: Arc::new(PauliChannel::identity(2)),
            hadamard: Arc::new(PauliChannel::identity(1)),
            rz: Arc::new(PauliChannel::identity(1)),
        }
    }

    pub fn for_noise(noise: &NoiseModel) -> Result<Self> {
        match noise {
            NoiseModel::Noiseless | NoiseModel::Uniform => Ok(Self::ideal()),
            NoiseModel::Dv { p_cz, p_m } => {
                let ch = |g: Gate| -> Result<Arc<PauliChannel>> {
                    let p = standard_pattern(g)?.clifford_carrier();
                    Ok(Arc::new(effective_channel_dv(&p, *p_cz, *p_m)?))
                };
                // Rz rides on the identity carrier wire; its XY-plane
                // measurement carries no extra DV noise model.
                Ok(GateChannels {
                    cnot: ch(Gate::Cnot)?,
                    hadamard: ch(Gate::Hadamard)?,
                    rz: ch(Gate::Rotation(0.0))?,
                })
            }
            NoiseModel::Gkp(params) => {
                let ch = |g: Gate| -> Result<Arc<PauliChannel>> {
                    Ok(Arc::new(gkp::effective_channel_gkp(&standard_pattern(g)?, params)?))
                };
                Ok(GateChannels {
                    cnot: ch(Gate::Cnot)?,
                    hadamard: ch(Gate::Hadamard)?,
                    rz: Arc::new(gkp::rotation_channel(0.0, params)?),
                })
            }
        }
    }
}

/// Census of a compiled circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateCounts {
    pub cnot: usize,
    pub hadamard: usize,
    pub rz: usize,
}

/// Lowers every block to `{CNOT, H, Rz}`, each gate followed by its channel.
pub fn compile_noisy(mc: &ModelCircuit, channels: &GateChannels) -> Result<(LogicalCircuit, GateCounts)> {
    let mut c = LogicalCircuit::new(mc.width());
    let mut counts = GateCounts::default();
    let h = hadamard();
    for layer in mc.layers() {
        for ((a, b), u) in layer.pairs().zip(&layer.blocks) {
            let sites = [a, b];
            for op in kak_decompose(u)?.native_ops() {
                match op {
                    NativeOp::Cnot { control, target } => {
                        let (ct, tg) = (sites[control], sites[target]);
                        c.push_2q(ct, tg, cnot())?;
                        c.push_channel(&[ct, tg], channels.cnot.clone())?;
                        counts.cnot += 1;
                    }
                    NativeOp::Local { qubit, u } => {
                        let q = sites[qubit];
                        // u = Rz(alpha) H Rz(beta) H Rz(gamma) up to phase
                        let (alpha, beta, gamma) = euler_zxz(&u)?;
                        let seq = [Some(gamma), None, Some(beta), None, Some(alpha)];
                        for step in seq {
                            match step {
                                Some(angle) => {
                                    c.push_1q(q, rz(angle))?;
                                    c.push_channel(&[q], channels.rz.clone())?;
                                    counts.rz += 1;
                                }
                                None => {
                                    c.push_1q(q, h)?;
                                    c.push_channel(&[q], channels.hadamard.clone())?;
                                    counts.hadamard += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((c, counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessPolicy {
    /// `mean_h >= 2/3`.
    #[default]
    Threshold,
    /// `mean_h - 2 stderr >= 2/3`.
    Confidence,
}

impl std::str::FromStr for SuccessPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "threshold" => Ok(SuccessPolicy::Threshold),
            "confidence" => Ok(SuccessPolicy::Confidence),
            _ => Err(Error::InvalidArgument(format!(
                "unknown success policy {s:?} (threshold|confidence)"
            ))),
        }
    }
}

impl SuccessPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SuccessPolicy::Threshold => "threshold",
            SuccessPolicy::Confidence => "confidence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvConfig {
    pub n_instances: usize,
    /// Trajectories per instance when the noisy run is not exact.
    pub shots: usize,
    pub seed: u64,
    /// Widths up to this use the density-matrix path.
    pub exact_max_width: usize,
    pub policy: SuccessPolicy,
    /// How instances and sweep cells are scheduled; results do not depend on it.
    pub strategy: Strategy,
}

impl Default for QvConfig {
    fn default() -> Self {
        QvConfig {
            n_instances: 1600,
            shots: 100,
            seed: 0,
            exact_max_width: 8,
            policy: SuccessPolicy::Threshold,
            strategy: Strategy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Exact,
    Trajectory,
    Uniform,
}

#[derive(Debug, Clone, Serialize)]
pub struct QvRunResult {
    pub d: usize,
    pub n_instances: usize,
    pub mode: RunMode,
    pub shots: usize,
    pub mean_h: G17,
    pub stderr: G17,
    pub threshold_pass: bool,
    pub confidence_pass: bool,
    pub policy: SuccessPolicy,
    pub passed: bool,
    /// Heavy mass of the ideal distributions, averaged over instances.
    pub mean_ideal_h: G17,
    pub instance_h: Vec<G17>,
    pub gate_counts: GateCountsJson,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GateCountsJson {
    pub cnot: usize,
    pub hadamard: usize,
    pub rz: usize,
    pub channels: usize,
}

impl QvRunResult {
    pub fn mean_h(&self) -> f64 {
        self.mean_h.0
    }

    pub fn stderr(&self) -> f64 {
        self.stderr.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct InstanceOutcome {
    h: f64,
    ideal_h: f64,
    counts: GateCounts,
    channels: usize,
}

fn run_instance(
    d: usize,
    index: usize,
    channels: &GateChannels,
    config: &QvConfig,
    mode: RunMode,
) -> Result<InstanceOutcome> {
    let mut rng = task_rng(config.seed, "qv-circuit", &[d as u64, index as u64]);
    let mc = generate_model_circuit(d, &mut rng)?;
    let ideal = mc.ideal_distribution()?;
    let heavy = heavy_set(&ideal)?;
    let ideal_h = heavy.mass(&ideal);
    if mode == RunMode::Uniform {
        let uniform = vec![1.0 / ideal.len() as f64; ideal.len()];
        return Ok(InstanceOutcome { h: heavy.mass(&uniform), ideal_h, counts: GateCounts::default(), channels: 0 });
    }
    let (circuit, counts) = compile_noisy(&mc, channels)?;
    let compiled = CompiledCircuit::new(&circuit)?;
    let zero = StateVector::zero(d)?;
    let h = match mode {
        RunMode::Exact => heavy.mass(&compiled.exact_distribution(&zero)?),
        _ => {
            let mut total = 0.0;
            for shot in 0..config.shots {
                let mut traj = task_rng(config.seed, "qv-trajectory", &[d as u64, index as u64, shot as u64]);
                let mut state = zero.clone();
                compiled.run_trajectory(&mut state, &mut traj);
                total += heavy.mass(&state.probabilities());
            }
            total / config.shots as f64
        }
    };
    Ok(InstanceOutcome { h, ideal_h, counts, channels: circuit.num_channels() })
}

/// Heavy-output statistics of width `d` over `config.n_instances` instances.
pub fn run_qv(d: usize, noise: &NoiseModel, config: &QvConfig) -> Result<QvRunResult> {
    if d < 2 {
        return Err(Error::InvalidWidth(d));
    }
    if config.n_instances == 0 {
        return Err(Error::InvalidArgument("n_instances must be >= 1".into()));
    }
    let mode = match noise {
        NoiseModel::Uniform => RunMode::Uniform,
        _ if d <= config.exact_max_width => RunMode::Exact,
        _ => RunMode::Trajectory,
    };
    if mode == RunMode::Exact && d > crate::sim::MAX_EXACT_QUBITS {
        return Err(Error::ExactModeTooLarge { n: d, max: crate::sim::MAX_EXACT_QUBITS });
    }
    if mode == RunMode::Trajectory && config.shots == 0 {
        return Err(Error::InvalidArgument("trajectory mode needs shots >= 1".into()));
    }
    let channels = GateChannels::for_noise(noise)?;
    let indices: Vec<usize> = (0..config.n_instances).collect();
    let outcomes = config.strategy.try_map(&indices, |&i| run_instance(d, i, &channels, config, mode))?;

    let hs: Vec<f64> = outcomes.iter().map(|o| o.h).collect();
    let (mean_h, stderr) = mean_and_stderr(&hs);
    let mean_ideal_h = outcomes.iter().map(|o| o.ideal_h).sum::<f64>() / hs.len() as f64;
    let threshold_pass = mean_h >= HEAVY_THRESHOLD;
    let confidence_pass = mean_h - 2.0 * stderr >= HEAVY_THRESHOLD;
    let passed = match config.policy {
        SuccessPolicy::Threshold => threshold_pass,
        SuccessPolicy::Confidence => confidence_pass,
    };
    let first = &outcomes[0];
    let mut metadata = noise.describe();
    metadata.insert("seed".into(), config.seed.to_string());
    metadata.insert("exact_max_width".into(), config.exact_max_width.to_string());
    Ok(QvRunResult {
        d,
        n_instances: config.n_instances,
        mode,
        shots: if mode == RunMode::Trajectory { config.shots } else { 0 },
        mean_h: G17(mean_h),
        stderr: G17(stderr),
        threshold_pass,
        confidence_pass,
        policy: config.policy,
        passed,
        mean_ideal_h: G17(mean_ideal_h),
        instance_h: hs.into_iter().map(G17).collect(),
        gate_counts: GateCountsJson {
            cnot: first.counts.cnot,
            hadamard: first.counts.hadamard,
            rz: first.counts.rz,
            channels: first.channels,
        },
        metadata,
    })
}

/// Outcome of a width search.
#[derive(Debug, Clone)]
pub struct QvSearch {
    pub log2_qv: usize,
    /// The run at the passing width, or at width 2 when none passed.
    pub deciding_run: QvRunResult,
}

/// Largest width `d <= d_max` that passes, searching downward; 0 if none.
pub fn quantum_volume(noise: &NoiseModel, d_max: usize, config: &QvConfig) -> Result<QvSearch> {
    if d_max < 2 {
        return Err(Error::InvalidWidth(d_max));
    }
    let mut last = None;
    for d in (2..=d_max).rev() {
        let run = run_qv(d, noise, config)?;
        if run.passed {
            return Ok(QvSearch { log2_qv: d, deciding_run: run });
        }
        last = Some(run);
    }
    Ok(QvSearch { log2_qv: 0, deciding_run: last.expect("d_max >= 2") })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    pub s_gkp_db: f64,
    pub cz_mode: CzMode,
    pub log2_qv: usize,
    pub mean_h: f64,
    pub stderr: f64,
    pub n_instances: usize,
    pub seed: u64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "eta,s_gkp_db,cz_mode,log2_qv,mean_h,stderr,n_instances,seed";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            g17(self.eta),
            g17(self.s_gkp_db),
            self.cz_mode,
            self.log2_qv,
            g17(self.mean_h),
            g17(self.stderr),
            self.n_instances,
            self.seed
        )
    }
}

/// One width search per `(eta, s_gkp)` cell, rows in grid order (eta outer).
///
/// Every cell uses the same master seed, so all cells see the same model
/// circuits and trajectory streams.
pub fn qv_sweep(
    eta_grid: &[f64],
    s_grid: &[f64],
    cz_mode: CzMode,
    d_max: usize,
    base: &GkpNoiseParams,
    config: &QvConfig,
) -> Result<Vec<SweepRow>> {
    if eta_grid.is_empty() || s_grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be non-empty".into()));
    }
    let cells: Vec<(f64, f64)> =
        eta_grid.iter().flat_map(|&e| s_grid.iter().map(move |&s| (e, s))).collect();
    config.strategy.try_map(&cells, |&(eta, s)| {
        let params = GkpNoiseParams { eta, s_gkp_db: s, ..*base }.with_cz_mode(cz_mode)?;
        params.validate()?;
        let search = quantum_volume(&NoiseModel::Gkp(params), d_max, config)?;
        Ok(SweepRow {
            eta,
            s_gkp_db: s,
            cz_mode,
            log2_qv: search.log2_qv,
            mean_h: search.deciding_run.mean_h(),
            stderr: search.deciding_run.stderr(),
            n_instances: config.n_instances,
            seed: config.seed,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ExecutionMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_circuit_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let two = generate_model_circuit(2, &mut rng).unwrap();
        assert_eq!(two.layers().len(), 2);
        assert!(two.layers().iter().all(|l| l.blocks.len() == 1));
        let five = generate_model_circuit(5, &mut rng).unwrap();
        assert_eq!(five.layers().len(), 5);
        for l in five.layers() {
            assert_eq!(l.blocks.len(), 2);
            let mut p = l.permutation.clone();
            p.sort();
            assert_eq!(p, (0..5).collect::<Vec<_>>());
        }
        assert!(matches!(generate_model_circuit(1, &mut rng), Err(Error::InvalidWidth(1))));
        let a = generate_model_circuit(4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = generate_model_circuit(4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.layers()[3].blocks, b.layers()[3].blocks);
        assert_eq!(a.layers()[3].permutation, b.layers()[3].permutation);
    }

    #[test]
    fn heavy_set_examples() {
        let uniform = heavy_set(&[0.25; 4]).unwrap();
        assert!(uniform.outputs.is_empty());
        assert_eq!(uniform.p_med, 0.25);
        let skew = heavy_set(&[0.9, 0.1]).unwrap();
        assert_eq!(skew.outputs, vec![0]);
        assert_eq!(skew.p_med, 0.5);
        let generic = heavy_set(&[0.1, 0.4, 0.2, 0.3]).unwrap();
        assert_eq!(generic.outputs, vec![1, 3]);
        assert!((generic.p_med - 0.25).abs() < 1e-15);
        assert!(heavy_set(&[0.5, 0.6]).is_err());
        assert!(heavy_set(&[0.5, 0.25, 0.25]).is_err());
        assert!(heavy_set(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn noiseless_compilation_reproduces_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 2..=4 {
            let mc = generate_model_circuit(d, &mut rng).unwrap();
            let (circuit, counts) = compile_noisy(&mc, &GateChannels::ideal()).unwrap();
            let blocks = d * (d / 2);
            assert_eq!(counts.cnot, 3 * blocks);
            assert_eq!(circuit.num_channels(), counts.cnot + counts.hadamard + counts.rz);
            // every basis state maps the same way up to one global phase
            let compiled = CompiledCircuit::new(&circuit).unwrap();
            let ideal = CompiledCircuit::new(&mc.ideal_circuit()).unwrap();
            let dim = 1 << d;
            let columns = |c: &CompiledCircuit| -> Vec<Vec<num_complex::Complex64>> {
                (0..dim)
                    .map(|k| {
                        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); dim];
                        amps[k] = num_complex::Complex64::new(1.0, 0.0);
                        let s = StateVector::from_amplitudes(amps).unwrap();
                        c.ideal_state(&s).unwrap().amplitudes().to_vec()
                    })
                    .collect()
            };
            let (a, b) = (columns(&compiled), columns(&ideal));
            let overlap: num_complex::Complex64 =
                a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| y.conj() * x).sum();
            let phase = overlap / overlap.norm();
            let err = a
                .iter()
                .flatten()
                .zip(b.iter().flatten())
                .map(|(x, y)| (x - y * phase).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "d={d}: {err}");
        }
    }

    #[test]
    fn dv_noise_changes_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mc = generate_model_circuit(4, &mut rng).unwrap();
        let ch = GateChannels::for_noise(&NoiseModel::Dv { p_cz: 0.01, p_m: 0.01 }).unwrap();
        let (circuit, _) = compile_noisy(&mc, &ch).unwrap();
        let zero = StateVector::zero(4).unwrap();
        let noisy = match crate::sim::apply(&zero, &circuit, &mut rng, ExecutionMode::Exact).unwrap() {
            crate::sim::Outcome::Distribution(p) => p,
            _ => unreachable!(),
        };
        let ideal = mc.ideal_distribution().unwrap();
        let tv: f64 = noisy.iter().zip(&ideal).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv > 1e-3, "{tv}");
    }

    #[test]
    fn uniform_guess_is_one_half() {
        let config = QvConfig { n_instances: 20, ..QvConfig::default() };
        let r = run_qv(4, &NoiseModel::Uniform, &config).unwrap();
        assert!(r.instance_h.iter().all(|h| h.0 == 0.5));
        assert_eq!(r.mean_h(), 0.5);
        assert!(!r.threshold_pass);
    }

    #[test]
    fn strong_dv_noise_fails() {
        let config = QvConfig { n_instances: 10, ..QvConfig::default() };
        let r = run_qv(4, &NoiseModel::Dv { p_cz: 0.2, p_m: 0.2 }, &config).unwrap();
        assert!(r.mean_h() < HEAVY_THRESHOLD);
        assert!(r.mean_h() >= 0.0 && r.mean_h() <= 1.0);
    }

    #[test]
    fn noiseless_volume_hits_cap() {
        let config = QvConfig { n_instances: 30, ..QvConfig::default() };
        let s = quantum_volume(&NoiseModel::Noiseless, 5, &config).unwrap();
        assert_eq!(s.log2_qv, 5);
        let dead = quantum_volume(&NoiseModel::Dv { p_cz: 0.75, p_m: 0.75 }, 3, &config).unwrap();
        assert_eq!(dead.log2_qv, 0);
    }

    #[test]
    fn pass_flags_follow_statistics() {
        let config = QvConfig { n_instances: 12, ..QvConfig::default() };
        let r = run_qv(3, &NoiseModel::Dv { p_cz: 0.002, p_m: 0.002 }, &config).unwrap();
        assert_eq!(r.threshold_pass, r.mean_h() >= HEAVY_THRESHOLD);
        assert_eq!(r.confidence_pass, r.mean_h() - 2.0 * r.stderr() >= HEAVY_THRESHOLD);
        assert!(r.mean_ideal_h.0 >= 0.5);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["d"], 3);
        assert_eq!(json["mode"], "exact");
        assert_eq!(json["metadata"]["noise"], "dv");
    }

    #[test]
    fn strategy_does_not_change_results() {
        let noise = NoiseModel::Dv { p_cz: 0.01, p_m: 0.005 };
        let seq = QvConfig { n_instances: 6, shots: 5, exact_max_width: 2, strategy: Strategy::Sequential, ..QvConfig::default() };
        let par = QvConfig { strategy: Strategy::Parallel, ..seq };
        assert_eq!(run_qv(3, &noise, &seq).unwrap().to_json(), run_qv(3, &noise, &par).unwrap().to_json());
    }

    #[test]
    fn sweep_rows_are_reproducible() {
        let config = QvConfig { n_instances: 4, shots: 4, ..QvConfig::default() };
        let base = GkpNoiseParams::new(20.0, 1.0).unwrap();
        let a = qv_sweep(&[0.9, 1.0], &[12.0, 20.0], CzMode::Off, 3, &base, &config).unwrap();
        let b = qv_sweep(&[0.9, 1.0], &[12.0, 20.0], CzMode::Off, 3, &base, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!((a[1].eta, a[1].s_gkp_db), (0.9, 20.0));
        assert!(a[0].to_csv().starts_with("0.90000000000000002,12,off,"));
    }
}

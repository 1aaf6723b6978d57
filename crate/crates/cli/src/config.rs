//! Run configuration: defaults, a flat `key=value` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mbqv_core::fmt::g17;
use mbqv_core::gkp::{ChannelMode, CzMode, GkpNoiseParams, RotationModel};
use mbqv_core::mbqc::{Gate, NoiseCase};
use mbqv_core::qv::{NoiseModel, QvConfig, SuccessPolicy};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key {key:?}{}", location(.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
    #[error("{key} given twice ({first} and {second})")]
    Conflict { key: String, first: String, second: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

fn location(line: &Option<usize>) -> String {
    line.map(|l| format!(" on line {l}")).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DvChannel,
    GkpChannel,
    FidelityCurve,
    QvRun,
    QvSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DvChannel => "dv-channel",
            Command::GkpChannel => "gkp-channel",
            Command::FidelityCurve => "fidelity-curve",
            Command::QvRun => "qv-run",
            Command::QvSweep => "qv-sweep",
        }
    }

    fn default_format(self) -> Format {
        match self {
            Command::FidelityCurve | Command::QvSweep => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// CZ noise of a GKP run: tied to the state squeezing, absent, or fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CzSetting {
    Mode(CzMode),
    Db(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Dv,
    Gkp,
    Uniform,
}

/// Every recognized key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("format", ""),
    ("gate", "hadamard"),
    ("gates", "hadamard,cnot"),
    ("cases", "meas,cz,both"),
    ("grid.p", "0:0.1:21"),
    ("grid.s_gkp_db", ""),
    ("grid.eta", "0.85,0.88,0.9,0.95,1"),
    ("dv.p_cz", "0"),
    ("dv.p_m", "0"),
    ("gkp.s_gkp_db", "20"),
    ("gkp.s_cz", "matched"),
    ("gkp.eta", "1"),
    ("gkp.xcov", "0"),
    ("gkp.rot_c0", ""),
    ("gkp.rot_c1", ""),
    ("gkp.mode", "analytic"),
    ("gkp.samples", "1000000"),
    ("qv.noise", "gkp"),
    ("qv.d", "4"),
    ("qv.d_max", "10"),
    ("qv.instances", "1600"),
    ("qv.shots", "100"),
    ("qv.exact_max_width", "8"),
    ("qv.policy", "threshold"),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Parses the `key=value` file format; `#` starts a comment line.
pub fn parse_file_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        let key = k.trim().to_string();
        if !is_known(&key) {
            return Err(ConfigError::UnknownKey { key, line: Some(i + 1) });
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_file_text(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: u64,
    pub gate: Gate,
    pub gates: Vec<Gate>,
    pub cases: Vec<NoiseCase>,
    pub p_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
    pub p_cz: f64,
    pub p_m: f64,
    pub gkp: GkpNoiseParams,
    pub cz: CzSetting,
    pub noise: NoiseKind,
    pub d: usize,
    pub d_max: usize,
    pub qv: QvConfig,
    /// Canonical text of every key, for the artifact header.
    values: BTreeMap<&'static str, String>,
}

fn invalid(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

fn float(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| invalid(key, format!("{v:?} is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, format!("{v:?} is not finite")))
    }
}

fn int<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| invalid(key, format!("{v:?} is not a non-negative integer")))
}

fn rate(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x = float(key, v)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(invalid(key, format!("{x} violates 0 <= p <= 1")))
    }
}

/// `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
fn grid(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let (a, b) = (float(key, parts[0].trim())?, float(key, parts[1].trim())?);
        let n: usize = int(key, parts[2].trim())?;
        return match n {
            0 => Err(invalid(key, "range needs at least one point")),
            1 => Ok(vec![a]),
            _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
        };
    }
    v.split(',').map(|s| float(key, s.trim())).collect()
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|s| s.trim().parse::<T>().map_err(|e| invalid(key, e))).collect()
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| g17(*x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Resolves defaults, then `file` entries, then `flags`; later wins.
    pub fn resolve(
        command: Command,
        file: &[(String, String)],
        flags: &[(&'static str, String)],
        output: Option<PathBuf>,
        workers: Option<usize>,
    ) -> Result<Self, ConfigError> {
        let mut raw: BTreeMap<&'static str, String> =
            KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect();
        for (k, v) in file {
            let key = KEYS
                .iter()
                .find(|(name, _)| name == k)
                .map(|(name, _)| *name)
                .ok_or_else(|| ConfigError::UnknownKey { key: k.clone(), line: None })?;
            raw.insert(key, v.clone());
        }
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in flags {
            if let Some(first) = seen.insert(k, v) {
                return Err(ConfigError::Conflict { key: k.to_string(), first: first.into(), second: v.clone() });
            }
            raw.insert(k, v.clone());
        }
        if workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        Self::from_raw(command, raw, output, workers)
    }

    fn from_raw(
        command: Command,
        raw: BTreeMap<&'static str, String>,
        output: Option<PathBuf>,
        workers: Option<usize>,
    ) -> Result<Self, ConfigError> {
        let get = |k: &str| raw[k].trim().to_string();
        let format = match get("format").as_str() {
            "" => command.default_format(),
            "json" => Format::Json,
            "csv" => Format::Csv,
            other => return Err(invalid("format", format!("{other:?} is not json or csv"))),
        };
        let seed: u64 = int("seed", &get("seed"))?;
        let gate: Gate = get("gate").parse().map_err(|e| invalid("gate", e))?;
        let gates: Vec<Gate> = list("gates", &get("gates"))?;
        let cases: Vec<NoiseCase> = list("cases", &get("cases"))?;
        let p_grid = grid("grid.p", &get("grid.p"))?;
        if let Some(p) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid("grid.p", format!("{p} violates 0 <= p <= 1")));
        }
        let s_grid = grid("grid.s_gkp_db", &get("grid.s_gkp_db"))?;
        if let Some(s) = s_grid.iter().find(|s| !(**s > 0.0)) {
            return Err(invalid("grid.s_gkp_db", format!("{s} violates s > 0")));
        }
        let eta_grid = grid("grid.eta", &get("grid.eta"))?;
        if let Some(e) = eta_grid.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(invalid("grid.eta", format!("{e} violates 0 < eta <= 1")));
        }
        let p_cz = rate("dv.p_cz", &get("dv.p_cz"))?;
        let p_m = rate("dv.p_m", &get("dv.p_m"))?;

        let s_gkp = float("gkp.s_gkp_db", &get("gkp.s_gkp_db"))?;
        if s_gkp < 0.0 {
            return Err(invalid("gkp.s_gkp_db", format!("{s_gkp} violates s >= 0")));
        }
        let eta = float("gkp.eta", &get("gkp.eta"))?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid("gkp.eta", format!("{eta} violates 0 < eta <= 1")));
        }
        let cz = match get("gkp.s_cz").as_str() {
            "matched" => CzSetting::Mode(CzMode::Matched),
            "off" => CzSetting::Mode(CzMode::Off),
            v => {
                let db = float("gkp.s_cz", v)
                    .map_err(|_| invalid("gkp.s_cz", format!("{v:?} is not matched, off or a dB value")))?;
                if db < 0.0 {
                    return Err(invalid("gkp.s_cz", format!("{db} violates s >= 0")));
                }
                CzSetting::Db(db)
            }
        };
        let rotation = RotationModel {
            c0: match get("gkp.rot_c0").as_str() {
                "" => RotationModel::DEFAULT.c0,
                v => rate("gkp.rot_c0", v)?,
            },
            c1: match get("gkp.rot_c1").as_str() {
                "" => RotationModel::DEFAULT.c1,
                v => {
                    let c = float("gkp.rot_c1", v)?;
                    if c < 0.0 {
                        return Err(invalid("gkp.rot_c1", format!("{c} violates c1 >= 0")));
                    }
                    c
                }
            },
        };
        let samples: u64 = int("gkp.samples", &get("gkp.samples"))?;
        let mode = match get("gkp.mode").as_str() {
            "analytic" => ChannelMode::Analytic,
            "sampled" if samples > 0 => ChannelMode::Sampled { samples, seed },
            "sampled" => return Err(invalid("gkp.samples", "sampled mode needs samples >= 1")),
            other => return Err(invalid("gkp.mode", format!("{other:?} is not analytic or sampled"))),
        };
        let mut gkp = GkpNoiseParams::new(s_gkp, eta).map_err(|e| invalid("gkp", e))?;
        gkp.xcov = float("gkp.xcov", &get("gkp.xcov"))?;
        gkp.rotation = rotation;
        gkp.mode = mode;
        gkp = apply_cz(gkp, cz).map_err(|e| invalid("gkp.s_cz", e))?;
        gkp.validate().map_err(|e| invalid("gkp.xcov", e))?;

        let noise = match get("qv.noise").as_str() {
            "none" => NoiseKind::None,
            "dv" => NoiseKind::Dv,
            "gkp" => NoiseKind::Gkp,
            "uniform" => NoiseKind::Uniform,
            other => return Err(invalid("qv.noise", format!("{other:?} is not none, dv, gkp or uniform"))),
        };
        let d: usize = int("qv.d", &get("qv.d"))?;
        if d < 2 {
            return Err(invalid("qv.d", format!("{d} violates d >= 2")));
        }
        let d_max: usize = int("qv.d_max", &get("qv.d_max"))?;
        if d_max < 2 {
            return Err(invalid("qv.d_max", format!("{d_max} violates d_max >= 2")));
        }
        let n_instances: usize = int("qv.instances", &get("qv.instances"))?;
        if n_instances == 0 {
            return Err(invalid("qv.instances", "must be at least 1"));
        }
        let shots: usize = int("qv.shots", &get("qv.shots"))?;
        if shots == 0 {
            return Err(invalid("qv.shots", "must be at least 1"));
        }
        let exact_max_width: usize = int("qv.exact_max_width", &get("qv.exact_max_width"))?;
        if exact_max_width > mbqv_core::sim::MAX_EXACT_QUBITS {
            return Err(invalid(
                "qv.exact_max_width",
                format!("{exact_max_width} exceeds the exact-mode limit {}", mbqv_core::sim::MAX_EXACT_QUBITS),
            ));
        }
        let policy: SuccessPolicy = get("qv.policy").parse().map_err(|e| invalid("qv.policy", e))?;
        let qv = QvConfig { n_instances, shots, seed, exact_max_width, policy, ..QvConfig::default() };

        let mut values = BTreeMap::new();
        values.insert("seed", seed.to_string());
        values.insert("format", format.name().to_string());
        values.insert("gate", gate.to_string());
        values.insert("gates", gates.iter().map(Gate::to_string).collect::<Vec<_>>().join(","));
        values.insert("cases", cases.iter().map(|c| c.name()).collect::<Vec<_>>().join(","));
        values.insert("grid.p", join_floats(&p_grid));
        values.insert("grid.s_gkp_db", join_floats(&s_grid));
        values.insert("grid.eta", join_floats(&eta_grid));
        values.insert("dv.p_cz", g17(p_cz));
        values.insert("dv.p_m", g17(p_m));
        values.insert("gkp.s_gkp_db", g17(s_gkp));
        values.insert(
            "gkp.s_cz",
            match cz {
                CzSetting::Mode(m) => m.name().to_string(),
                CzSetting::Db(db) => g17(db),
            },
        );
        values.insert("gkp.sigma2_cz", g17(gkp.sigma2_cz));
        values.insert("gkp.eta", g17(eta));
        values.insert("gkp.xcov", g17(gkp.xcov));
        values.insert("gkp.rot_c0", g17(rotation.c0));
        values.insert("gkp.rot_c1", g17(rotation.c1));
        values.insert("gkp.mode", get("gkp.mode"));
        values.insert("gkp.samples", samples.to_string());
        values.insert(
            "qv.noise",
            match noise {
                NoiseKind::None => "none",
                NoiseKind::Dv => "dv",
                NoiseKind::Gkp => "gkp",
                NoiseKind::Uniform => "uniform",
            }
            .to_string(),
        );
        values.insert("qv.d", d.to_string());
        values.insert("qv.d_max", d_max.to_string());
        values.insert("qv.instances", n_instances.to_string());
        values.insert("qv.shots", shots.to_string());
        values.insert("qv.exact_max_width", exact_max_width.to_string());
        values.insert("qv.policy", policy.name().to_string());

        Ok(RunConfig {
            command,
            format,
            output,
            workers,
            seed,
            gate,
            gates,
            cases,
            p_grid,
            s_grid,
            eta_grid,
            p_cz,
            p_m,
            gkp,
            cz,
            noise,
            d,
            d_max,
            qv,
            values,
        })
    }

    /// The physical noise of a `qv-run`.
    pub fn noise_model(&self) -> NoiseModel {
        match self.noise {
            NoiseKind::None => NoiseModel::Noiseless,
            NoiseKind::Dv => NoiseModel::Dv { p_cz: self.p_cz, p_m: self.p_m },
            NoiseKind::Gkp => NoiseModel::Gkp(self.gkp),
            NoiseKind::Uniform => NoiseModel::Uniform,
        }
    }

    /// Resolved values of the keys that affect this command's output.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        const GKP: &[&str] = &[
            "gkp.s_gkp_db",
            "gkp.s_cz",
            "gkp.sigma2_cz",
            "gkp.eta",
            "gkp.xcov",
            "gkp.rot_c0",
            "gkp.rot_c1",
            "gkp.mode",
            "gkp.samples",
        ];
        const QV: &[&str] = &["qv.instances", "qv.shots", "qv.exact_max_width", "qv.policy"];
        let mut keys: Vec<&str> = vec!["seed", "format"];
        match self.command {
            Command::DvChannel => keys.extend(["gate", "dv.p_cz", "dv.p_m"]),
            Command::GkpChannel => {
                keys.extend(["gate", "grid.s_gkp_db"]);
                keys.extend(GKP);
            }
            Command::FidelityCurve => keys.extend(["gates", "cases", "grid.p"]),
            Command::QvRun => {
                keys.extend(["qv.noise", "qv.d"]);
                keys.extend(QV);
                match self.noise {
                    NoiseKind::Dv => keys.extend(["dv.p_cz", "dv.p_m"]),
                    NoiseKind::Gkp => keys.extend(GKP),
                    _ => {}
                }
            }
            Command::QvSweep => {
                keys.extend(["grid.eta", "grid.s_gkp_db", "qv.d_max"]);
                keys.extend(QV);
                keys.extend(GKP.iter().filter(|k| !matches!(**k, "gkp.s_gkp_db" | "gkp.eta" | "gkp.sigma2_cz")));
            }
        }
        keys.into_iter()
            .map(|k| {
                let key = *self.values.keys().find(|name| **name == k).expect("echoed key");
                (key, self.values[k].clone())
            })
            .collect()
    }
}

pub fn apply_cz(p: GkpNoiseParams, cz: CzSetting) -> mbqv_core::Result<GkpNoiseParams> {
    match cz {
        CzSetting::Mode(m) => p.with_cz_mode(m),
        CzSetting::Db(db) => p.with_cz_db(db),
    }
}

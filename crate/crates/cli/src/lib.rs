//! Command-line driver for `mbqv-core`.
//!
//! Every artifact starts with the resolved configuration: a `config` object in
//! JSON output, `# key=value` lines ahead of the header in CSV output. Timing
//! goes to stderr so that reruns with the same seed are byte-identical.

pub mod config;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mbqv_core::fmt::{g17, G17};
use mbqv_core::gkp::{effective_channel_gkp, infidelity_vs_squeezing, rotation_channel};
use mbqv_core::mbqc::{effective_channel_dv, fidelity_curve, standard_pattern, Gate};
use mbqv_core::pauli::{average_gate_fidelity, process_fidelity, PauliChannel};
use mbqv_core::qv::{qv_sweep, run_qv, SweepRow};
use serde::Serialize;

pub use config::{Command, ConfigError, Format, RunConfig};
use config::CzSetting;

#[derive(Debug, Parser)]
#[command(name = "mbqv", version, about = "Logical noise and quantum volume of measurement-based quantum computers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Effective channel of a DV pattern under depolarizing CZ and measurement noise.
    DvChannel(Flags),
    /// Effective channel of a GKP pattern, or its infidelity along --s-grid.
    GkpChannel(Flags),
    /// Average gate fidelity of DV patterns along --p-grid.
    FidelityCurve(Flags),
    /// Heavy-output statistics of width --d.
    QvRun(Flags),
    /// Quantum volume over an (eta, s_gkp) grid.
    QvSweep(Flags),
}

/// Flags shared by every subcommand; each overrides its config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat key=value file (e.g. `gkp.s_gkp_db=22`).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Worker threads; does not change results.
    #[arg(long, env = "MBQV_WORKERS")]
    pub workers: Option<usize>,
    /// json or csv.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// hadamard, cnot, cz or rotation(theta).
    #[arg(long)]
    pub gate: Option<String>,
    /// Comma-separated gates for fidelity-curve.
    #[arg(long)]
    pub gates: Option<String>,
    /// Comma-separated noise cases (meas, cz, both).
    #[arg(long)]
    pub cases: Option<String>,
    /// Error-rate grid: `a,b,c` or `start:stop:count`.
    #[arg(long)]
    pub p_grid: Option<String>,
    /// Squeezing grid in dB.
    #[arg(long)]
    pub s_grid: Option<String>,
    /// Detector-efficiency grid.
    #[arg(long)]
    pub eta_grid: Option<String>,
    #[arg(long)]
    pub p_cz: Option<String>,
    #[arg(long)]
    pub p_m: Option<String>,
    /// GKP squeezing in dB.
    #[arg(long)]
    pub s_gkp: Option<String>,
    /// CZ squeezing: matched, off, or a dB value.
    #[arg(long, visible_alias = "cz-mode")]
    pub s_cz: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub xcov: Option<String>,
    #[arg(long)]
    pub rot_c0: Option<String>,
    #[arg(long)]
    pub rot_c1: Option<String>,
    /// analytic or sampled.
    #[arg(long)]
    pub gkp_mode: Option<String>,
    #[arg(long)]
    pub gkp_samples: Option<String>,
    /// none, dv, gkp or uniform.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub d_max: Option<String>,
    #[arg(long)]
    pub instances: Option<String>,
    #[arg(long)]
    pub shots: Option<String>,
    #[arg(long)]
    pub exact_max_width: Option<String>,
    /// threshold or confidence.
    #[arg(long)]
    pub policy: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let pairs: [(&'static str, &Option<String>); 25] = [
            ("format", &self.format),
            ("seed", &self.seed),
            ("gate", &self.gate),
            ("gates", &self.gates),
            ("cases", &self.cases),
            ("grid.p", &self.p_grid),
            ("grid.s_gkp_db", &self.s_grid),
            ("grid.eta", &self.eta_grid),
            ("dv.p_cz", &self.p_cz),
            ("dv.p_m", &self.p_m),
            ("gkp.s_gkp_db", &self.s_gkp),
            ("gkp.s_cz", &self.s_cz),
            ("gkp.eta", &self.eta),
            ("gkp.xcov", &self.xcov),
            ("gkp.rot_c0", &self.rot_c0),
            ("gkp.rot_c1", &self.rot_c1),
            ("gkp.mode", &self.gkp_mode),
            ("gkp.samples", &self.gkp_samples),
            ("qv.noise", &self.noise),
            ("qv.d", &self.d),
            ("qv.d_max", &self.d_max),
            ("qv.instances", &self.instances),
            ("qv.shots", &self.shots),
            ("qv.exact_max_width", &self.exact_max_width),
            ("qv.policy", &self.policy),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect()
    }
}

impl Sub {
    fn split(&self) -> (Command, &Flags) {
        match self {
            Sub::DvChannel(f) => (Command::DvChannel, f),
            Sub::GkpChannel(f) => (Command::GkpChannel, f),
            Sub::FidelityCurve(f) => (Command::FidelityCurve, f),
            Sub::QvRun(f) => (Command::QvRun, f),
            Sub::QvSweep(f) => (Command::QvSweep, f),
        }
    }
}

/// Builds the resolved configuration from parsed arguments.
pub fn parse_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let (command, flags) = cli.command.split();
    let file = match &flags.config {
        Some(path) => config::read_file(path)?,
        None => Vec::new(),
    };
    RunConfig::resolve(command, &file, &flags.overrides(), flags.output.clone(), flags.workers)
}

pub const VERSION: &str = concat!("mbqv ", env!("CARGO_PKG_VERSION"));

#[derive(Serialize)]
struct JsonArtifact<'a, T: Serialize> {
    command: &'static str,
    version: &'static str,
    config: serde_json::Map<String, serde_json::Value>,
    result: &'a T,
}

fn json_artifact<T: Serialize>(cfg: &RunConfig, result: &T) -> String {
    let config = cfg.echo().into_iter().map(|(k, v)| (k.to_string(), serde_json::Value::String(v))).collect();
    let art = JsonArtifact { command: cfg.command.name(), version: VERSION, config, result };
    let mut s = serde_json::to_string_pretty(&art).expect("artifact serializes");
    s.push('\n');
    s
}

fn csv_artifact(cfg: &RunConfig, header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("# command={}\n# version={}\n", cfg.command.name(), VERSION);
    for (k, v) in cfg.echo() {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct ChannelResult<'a> {
    gate: String,
    channel: &'a PauliChannel,
    process_fidelity: G17,
    average_gate_fidelity: G17,
}

fn channel_artifact(cfg: &RunConfig, gate: Gate, ch: &PauliChannel) -> String {
    match cfg.format {
        Format::Json => json_artifact(
            cfg,
            &ChannelResult {
                gate: gate.to_string(),
                channel: ch,
                process_fidelity: G17(process_fidelity(ch)),
                average_gate_fidelity: G17(average_gate_fidelity(ch)),
            },
        ),
        Format::Csv => csv_artifact(cfg, "pauli,prob", ch.terms().map(|(p, w)| format!("{p},{}", g17(w)))),
    }
}

#[derive(Serialize)]
struct CurvePoint {
    gate: String,
    case: &'static str,
    p: G17,
    fidelity: G17,
}

#[derive(Serialize)]
struct InfidelityPoint {
    gate: String,
    cz_mode: String,
    eta: G17,
    s_gkp_db: G17,
    infidelity: G17,
}

#[derive(Serialize)]
struct SweepJson {
    eta: G17,
    s_gkp_db: G17,
    cz_mode: &'static str,
    log2_qv: usize,
    mean_h: G17,
    stderr: G17,
    n_instances: usize,
    seed: u64,
}

/// Runs the configured command and returns the artifact text.
pub fn execute(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        Command::DvChannel => {
            let pattern = standard_pattern(cfg.gate)?;
            let ch = effective_channel_dv(&pattern, cfg.p_cz, cfg.p_m)?;
            Ok(channel_artifact(cfg, cfg.gate, &ch))
        }
        Command::GkpChannel if cfg.s_grid.is_empty() => {
            let ch = match cfg.gate {
                Gate::Rotation(theta) => rotation_channel(theta, &cfg.gkp)?,
                g => effective_channel_gkp(&standard_pattern(g)?, &cfg.gkp)?,
            };
            Ok(channel_artifact(cfg, cfg.gate, &ch))
        }
        Command::GkpChannel => {
            let (mode, label) = match cfg.cz {
                CzSetting::Mode(m) => (m, m.name().to_string()),
                CzSetting::Db(_) => anyhow::bail!("gkp.s_cz: a squeezing grid needs matched or off"),
            };
            let points: Vec<InfidelityPoint> = infidelity_vs_squeezing(cfg.gate, &cfg.gkp, &cfg.s_grid, mode)?
                .into_iter()
                .map(|(s, inf)| InfidelityPoint {
                    gate: cfg.gate.to_string(),
                    cz_mode: label.clone(),
                    eta: G17(cfg.gkp.eta),
                    s_gkp_db: G17(s),
                    infidelity: G17(inf),
                })
                .collect();
            Ok(match cfg.format {
                Format::Json => json_artifact(cfg, &points),
                Format::Csv => csv_artifact(
                    cfg,
                    "gate,cz_mode,eta,s_gkp_db,infidelity",
                    points.iter().map(|p| {
                        format!("{},{},{},{},{}", p.gate, p.cz_mode, g17(p.eta.0), g17(p.s_gkp_db.0), g17(p.infidelity.0))
                    }),
                ),
            })
        }
        Command::FidelityCurve => {
            let mut points = Vec::new();
            for &gate in &cfg.gates {
                for &case in &cfg.cases {
                    for (p, f) in fidelity_curve(gate, case, &cfg.p_grid)? {
                        points.push(CurvePoint { gate: gate.to_string(), case: case.name(), p: G17(p), fidelity: G17(f) });
                    }
                }
            }
            Ok(match cfg.format {
                Format::Json => json_artifact(cfg, &points),
                Format::Csv => csv_artifact(
                    cfg,
                    "gate,case,p,fidelity",
                    points.iter().map(|c| format!("{},{},{},{}", c.gate, c.case, g17(c.p.0), g17(c.fidelity.0))),
                ),
            })
        }
        Command::QvRun => {
            let r = run_qv(cfg.d, &cfg.noise_model(), &cfg.qv)?;
            Ok(match cfg.format {
                Format::Json => json_artifact(cfg, &r),
                Format::Csv => csv_artifact(
                    cfg,
                    "d,n_instances,mean_h,stderr,threshold_pass,confidence_pass",
                    [format!(
                        "{},{},{},{},{},{}",
                        r.d,
                        r.n_instances,
                        g17(r.mean_h()),
                        g17(r.stderr()),
                        r.threshold_pass,
                        r.confidence_pass
                    )],
                ),
            })
        }
        Command::QvSweep => {
            let mode = match cfg.cz {
                CzSetting::Mode(m) => m,
                CzSetting::Db(_) => anyhow::bail!("gkp.s_cz: qv-sweep needs matched or off"),
            };
            if cfg.s_grid.is_empty() || cfg.eta_grid.is_empty() {
                anyhow::bail!("qv-sweep needs non-empty grid.eta and grid.s_gkp_db");
            }
            let rows = qv_sweep(&cfg.eta_grid, &cfg.s_grid, mode, cfg.d_max, &cfg.gkp, &cfg.qv)?;
            for r in &rows {
                eprintln!("cell eta={} s_gkp_db={} log2_qv={} mean_h={}", g17(r.eta), g17(r.s_gkp_db), r.log2_qv, g17(r.mean_h));
            }
            Ok(match cfg.format {
                Format::Csv => csv_artifact(cfg, SweepRow::CSV_HEADER, rows.iter().map(SweepRow::to_csv)),
                Format::Json => {
                    let js: Vec<SweepJson> = rows
                        .iter()
                        .map(|r| SweepJson {
                            eta: G17(r.eta),
                            s_gkp_db: G17(r.s_gkp_db),
                            cz_mode: r.cz_mode.name(),
                            log2_qv: r.log2_qv,
                            mean_h: G17(r.mean_h),
                            stderr: G17(r.stderr),
                            n_instances: r.n_instances,
                            seed: r.seed,
                        })
                        .collect();
                    json_artifact(cfg, &js)
                }
            })
        }
    }
}

fn write_artifact(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Executes inside a pool of `cfg.workers` threads when given.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let text = with_workers(cfg.workers, || execute(cfg))??;
    write_artifact(cfg, &text)?;
    eprintln!("{} finished in {:.3} s", cfg.command.name(), start.elapsed().as_secs_f64());
    Ok(())
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T: Send>(_workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

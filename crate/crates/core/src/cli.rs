//! Command-line front end: one subcommand per experiment shape, CSV outputs
//! plus a run manifest in the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;

use crate::checks::{run_suite, CheckStatus, SuiteOptions};
use crate::csv::fmt_f64;
use crate::dynamics::{adiabatic_validity_warning, integrate, IntegrateOptions, Model};
use crate::error::{Error, Result};
use crate::gate::{
    build_geometry, forster_coupling, scan, AngularMode, Blockade, BlockadeSign, ForsterModel, ResonanceMode,
    ScanAxis, ScanSpec, AXIS_NAMES,
};
use crate::mcwf::{coherent_ladder_with_threshold, ensemble_average, McwfOptions, DEFAULT_TAIL_THRESHOLD};
use crate::params::{mhz, Config, PhysicalParams, SingleExcState, PARAM_KEYS};

/// Exit status when an oracle check fails.
pub const EXIT_ORACLE_FAILURE: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "rydcav",
    version,
    about = "Rydberg-blocked ensemble in a cavity: Rabi dynamics, quantum trajectories, gate scans and dense-oracle checks",
    after_help = "Frequencies in config files are ordinary frequencies in MHz; times are in us.\n\
                  Exit codes: 0 ok, 1 io, 2 usage, 3 config, 4 numerical, 5 oracle check failed."
)]
pub struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, env = "RYDCAV_OUT", default_value = "rydcav-out")]
    pub out: PathBuf,

    /// Cap on worker threads for trajectory ensembles and scans.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-photon Rabi dynamics, full and adiabatic models.
    Rabi(RabiArgs),
    /// Ensemble-averaged quantum-jump trajectories for a coherent drive.
    Mcwf(McwfArgs),
    /// Gate reflection coefficients and fidelity over a parameter grid.
    GateScan(GateArgs),
    /// Dense-oracle consistency checks.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct RabiArgs {
    /// Key-value config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Time step in us (overrides the config).
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct McwfArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of trajectories (overrides the config).
    #[arg(long)]
    pub traces: Option<usize>,
    /// Photon-number cutoff (overrides the config).
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GateArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Optional config with `n_atoms` and `cutoff`.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Record of one invocation, written as `manifest.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub version: String,
    pub extra: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: Option<&Path>, output_dir: &Path) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            output_dir: output_dir.to_path_buf(),
            seed: None,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            version: env!("CARGO_PKG_VERSION").to_string(),
            extra: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "subcommand = {}", self.subcommand);
        if let Some(c) = &self.config_path {
            let _ = writeln!(s, "config = {}", c.display());
        }
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        let _ = writeln!(s, "timestamp = {}", self.timestamp);
        let _ = writeln!(s, "version = {}", self.version);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn read_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Config::parse(&text)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn allowed(extra: &[&'static str]) -> Vec<&'static str> {
    PARAM_KEYS.iter().chain(extra).copied().collect()
}

fn positive(cfg: &Config, key: &str, default: f64) -> Result<f64> {
    let v = cfg.f64_or(key, default)?;
    if !(v > 0.0) {
        return Err(Error::BadValue { key: key.into(), reason: format!("must be positive, got {v}") });
    }
    Ok(v)
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    fs::create_dir_all(&cli.out).map_err(|e| Error::Io(format!("{}: {e}", cli.out.display())))?;
    match &cli.command {
        Command::Rabi(a) => cmd_rabi(a, &cli.out),
        Command::Mcwf(a) => cmd_mcwf(a, &cli.out, cli.workers),
        Command::GateScan(a) => cmd_gate_scan(a, &cli.out, cli.workers),
        Command::OracleCheck(a) => cmd_oracle_check(a, &cli.out),
    }
}

pub const RABI_KEYS: &[&str] = &["t_end", "dt", "stride"];

fn cmd_rabi(args: &RabiArgs, out: &Path) -> Result<i32> {
    let mut cfg = read_config(&args.config)?;
    cfg.check_known(&allowed(RABI_KEYS))?;
    if let Some(dt) = args.dt {
        cfg.set("dt", fmt_f64(dt));
    }
    let p = PhysicalParams::from_config(&cfg)?;
    let opts = IntegrateOptions::new(positive(&cfg, "t_end", 10.0)?, positive(&cfg, "dt", 1e-4)?)
        .with_stride(cfg.usize_or("stride", 10)?);
    let full = integrate(SingleExcState::photon_loaded(), &p, opts, Model::Full)?;
    if let Some(w) = adiabatic_validity_warning(&p) {
        eprintln!("warning: {w}");
    }
    let adiabatic = integrate(SingleExcState::photon_loaded(), &p, opts, Model::Adiabatic)?;
    write(out, "rabi_full.csv", &full.to_csv())?;
    write(out, "rabi_adiabatic.csv", &adiabatic.to_csv())?;
    let mut m = RunManifest::new("rabi", Some(&args.config), out);
    m.extra.push(("effective_config".into(), "rabi_config.txt".into()));
    write(out, "rabi_config.txt", &cfg.to_text())?;
    write(out, "manifest.txt", &m.to_text())?;
    println!("wrote rabi_full.csv and rabi_adiabatic.csv ({} samples) to {}", full.len(), out.display());
    Ok(0)
}

pub const MCWF_KEYS: &[&str] =
    &["alpha", "alpha_im", "cutoff", "t_end", "dt", "sample_interval", "traces", "seed", "tail_threshold"];

fn cmd_mcwf(args: &McwfArgs, out: &Path, workers: Option<usize>) -> Result<i32> {
    let mut cfg = read_config(&args.config)?;
    cfg.check_known(&allowed(MCWF_KEYS))?;
    if let Some(s) = args.seed {
        cfg.set("seed", s.to_string());
    }
    if let Some(n) = args.traces {
        cfg.set("traces", n.to_string());
    }
    if let Some(c) = args.cutoff {
        cfg.set("cutoff", c.to_string());
    }
    if let Some(dt) = args.dt {
        cfg.set("dt", fmt_f64(dt));
    }
    let p = PhysicalParams::from_config(&cfg)?;
    let alpha = C64::new(cfg.f64_required("alpha")?, cfg.f64_or("alpha_im", 0.0)?);
    let cutoff = cfg.usize_opt("cutoff")?.ok_or_else(|| Error::MissingKey("cutoff".into()))?;
    let threshold = positive(&cfg, "tail_threshold", DEFAULT_TAIL_THRESHOLD)?;
    let dt = positive(&cfg, "dt", 1e-4)?;
    let opts = McwfOptions::new(positive(&cfg, "t_end", 20.0)?, dt)
        .with_sample_interval(positive(&cfg, "sample_interval", 0.01)?);
    let traces = cfg.usize_or("traces", 1000)?;
    let seed = cfg.u64_opt("seed")?.unwrap_or(0);
    // Pin every resolved value so the sidecar reproduces the run on its own.
    cfg.set("cutoff", cutoff.to_string());
    cfg.set("traces", traces.to_string());
    cfg.set("seed", seed.to_string());
    cfg.set("dt", fmt_f64(dt));
    let state0 = coherent_ladder_with_threshold(alpha, cutoff, threshold)?;
    let res = ensemble_average(&state0, &p, opts, traces, seed, workers)?;
    write(out, "mcwf.csv", &res.to_csv())?;
    write(out, "mcwf_meta.txt", &cfg.to_text())?;
    let mut m = RunManifest::new("mcwf", Some(&args.config), out);
    m.seed = Some(seed);
    m.extra.push(("traces".into(), traces.to_string()));
    m.extra.push(("effective_config".into(), "mcwf_meta.txt".into()));
    m.extra.push(("jumps_gamma_e".into(), res.jump_counts[0].to_string()));
    m.extra.push(("jumps_gamma_r".into(), res.jump_counts[1].to_string()));
    m.extra.push(("jumps_kappa".into(), res.jump_counts[2].to_string()));
    write(out, "manifest.txt", &m.to_text())?;
    println!("wrote mcwf.csv ({traces} trajectories, seed {seed}) to {}", out.display());
    Ok(0)
}

pub const GATE_KEYS: &[&str] = &[
    "lattice", "spacing", "qubit_offset", "c3", "angular_table", "blockade_sign", "delta", "resonance", "axes",
];

fn parse_axis(name: &str, text: &str) -> Result<ScanAxis> {
    let bad = |reason: String| Error::BadValue { key: format!("axis_{name}"), reason };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("'{s}' is not a number")));
    let parts: Vec<&str> = text.split(':').collect();
    let axis = match parts.as_slice() {
        [a, b, c] => ScanAxis::range(name, num(a)?, num(b)?, num(c)?),
        [_] => ScanAxis::new(name, text.split(',').map(num).collect::<Result<Vec<_>>>()?),
        _ => return Err(bad("expected start:stop:step or a comma-separated list".into())),
    };
    axis.map_err(|e| bad(e.to_string()))
}

/// Builds the scan description and the geometry dump from a gate-scan config.
pub fn gate_spec_from_config(cfg: &Config) -> Result<(ScanSpec, String)> {
    let axis_keys: Vec<String> = AXIS_NAMES.iter().map(|a| format!("axis_{a}")).collect();
    let mut known = allowed(GATE_KEYS);
    known.extend(axis_keys.iter().map(String::as_str));
    cfg.check_known(&known)?;

    let dims: Vec<usize> = cfg
        .get("lattice")
        .unwrap_or("10,10,10")
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::BadValue { key: "lattice".into(), reason: "expected nx,ny,nz".into() })?;
    let dims: [usize; 3] = dims
        .try_into()
        .map_err(|_| Error::BadValue { key: "lattice".into(), reason: "expected three integers".into() })?;
    let geom = build_geometry(dims, positive(cfg, "spacing", 0.37)?, cfg.f64_or("qubit_offset", 1.5)?)?;
    let angular = match cfg.get("angular_table") {
        Some(t) => AngularMode::parse_table(t)?,
        None => AngularMode::Isotropic,
    };
    let model = ForsterModel { c3: mhz(cfg.f64_required("c3")?), angular };
    let v_m = forster_coupling(&geom, &model)?;
    let sign = match cfg.get("blockade_sign").unwrap_or("+") {
        "+" | "positive" => BlockadeSign::Positive,
        "-" | "negative" => BlockadeSign::Negative,
        other => {
            return Err(Error::BadValue { key: "blockade_sign".into(), reason: format!("'{other}' is not + or -") })
        }
    };

    let mut pcfg = cfg.clone();
    match cfg.usize_opt("n_atoms")? {
        Some(n) if n != geom.len() => {
            return Err(Error::BadValue {
                key: "n_atoms".into(),
                reason: format!("lattice holds {} atoms, config says {n}", geom.len()),
            })
        }
        _ => pcfg.set("n_atoms", geom.len().to_string()),
    }
    let base = PhysicalParams::from_config(&pcfg)?;

    let resonance = match cfg.get("resonance").unwrap_or("analytic") {
        "analytic" => ResonanceMode::Analytic,
        "refined" => ResonanceMode::Refined,
        "fixed" => ResonanceMode::Fixed,
        other => {
            return Err(Error::BadValue {
                key: "resonance".into(),
                reason: format!("'{other}' is not analytic, refined or fixed"),
            })
        }
    };
    let mut axes = Vec::new();
    for name in cfg.get("axes").unwrap_or("").split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let key = format!("axis_{name}");
        let text = cfg.get(&key).ok_or_else(|| Error::MissingKey(key.clone()))?;
        axes.push(parse_axis(name, text)?);
    }
    for key in cfg.keys().filter(|k| k.starts_with("axis_")) {
        if !axes.iter().any(|a| format!("axis_{}", a.name) == key) {
            return Err(Error::BadValue { key: key.into(), reason: "axis not listed in `axes`".into() });
        }
    }
    if axes.is_empty() {
        // A single point at the base parameters.
        axes.push(ScanAxis::new("v_scale", vec![1.0])?);
    }
    let dump = geom.dump_csv(&v_m);
    let blockade = Blockade { v_m, g_profile: None, sign };
    Ok((ScanSpec { base, blockade, axes, delta: mhz(cfg.f64_or("delta", 0.0)?), resonance }, dump))
}

fn cmd_gate_scan(args: &GateArgs, out: &Path, workers: Option<usize>) -> Result<i32> {
    let cfg = read_config(&args.config)?;
    let (spec, dump) = gate_spec_from_config(&cfg)?;
    let table = scan(&spec, workers)?;
    write(out, "scan.csv", &table.to_csv())?;
    write(out, "geometry.csv", &dump)?;
    let flagged = table.rows.iter().filter(|r| r.status != "ok").count();
    let mut m = RunManifest::new("gate-scan", Some(&args.config), out);
    m.extra.push(("rows".into(), table.rows.len().to_string()));
    m.extra.push(("flagged_rows".into(), flagged.to_string()));
    write(out, "manifest.txt", &m.to_text())?;
    println!("wrote scan.csv ({} rows, {flagged} flagged) and geometry.csv to {}", table.rows.len(), out.display());
    Ok(0)
}

fn cmd_oracle_check(args: &OracleArgs, out: &Path) -> Result<i32> {
    let mut opts = SuiteOptions::default();
    if let Some(path) = &args.config {
        let cfg = read_config(path)?;
        cfg.check_known(&["n_atoms", "cutoff"])?;
        opts.n_atoms = cfg.usize_or("n_atoms", opts.n_atoms)?;
        opts.cutoff = cfg.usize_or("cutoff", opts.cutoff)?;
    }
    let results = run_suite(opts)?;
    let mut csv = String::from("check,value,tolerance,status\n");
    let mut failed = 0;
    for r in &results {
        println!("{:<34} {:<9} value {:<12.4e} tolerance {:.1e}", r.name, r.status.as_str(), r.value, r.tolerance);
        let _ = writeln!(csv, "{},{},{},{}", r.name, fmt_f64(r.value), fmt_f64(r.tolerance), r.status.as_str());
        if r.status == CheckStatus::Fail {
            failed += 1;
        }
    }
    write(out, "oracle_report.csv", &csv)?;
    let mut m = RunManifest::new("oracle-check", args.config.as_deref(), out);
    m.extra.push(("failed".into(), failed.to_string()));
    write(out, "manifest.txt", &m.to_text())?;
    Ok(if failed == 0 { 0 } else { EXIT_ORACLE_FAILURE })
}

//! Photon-atom controlled-phase gate: Förster blockade over an atom array,
//! conditional cavity reflection coefficients and the gate fidelity.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::csv::CsvWriter;
use crate::error::{Error, Result};
use crate::params::{mhz, to_mhz, PhysicalParams};

const I: C64 = C64::new(0.0, 1.0);

/// Ensemble lattice plus the qubit atom.
#[derive(Debug, Clone, PartialEq)]
pub struct GateGeometry {
    pub dims: [usize; 3],
    /// Site spacing in um.
    pub spacing: f64,
    pub qubit_position: [f64; 3],
    pub atom_positions: Vec<[f64; 3]>,
}

/// Centered `nx x ny x nz` lattice with the qubit `qubit_offset_sites` spacings
/// above the center of the top (largest z) layer.
pub fn build_geometry(dims: [usize; 3], spacing: f64, qubit_offset_sites: f64) -> Result<GateGeometry> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Geometry(format!("lattice dimensions must be positive, got {dims:?}")));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::Geometry(format!("spacing must be positive, got {spacing}")));
    }
    let axis = |n: usize| -> Vec<f64> { (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing).collect() };
    let (xs, ys, zs) = (axis(dims[0]), axis(dims[1]), axis(dims[2]));
    let mut atom_positions = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                atom_positions.push([x, y, z]);
            }
        }
    }
    let z_top = (dims[2] as f64 - 1.0) / 2.0 * spacing;
    Ok(GateGeometry {
        dims,
        spacing,
        qubit_position: [0.0, 0.0, z_top + qubit_offset_sites * spacing],
        atom_positions,
    })
}

impl GateGeometry {
    pub fn len(&self) -> usize {
        self.atom_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atom_positions.is_empty()
    }

    /// Qubit-atom distance (um) and polar angle from the lattice normal (rad).
    pub fn relative(&self, m: usize) -> (f64, f64) {
        let a = self.atom_positions[m];
        let q = self.qubit_position;
        let d = [a[0] - q[0], a[1] - q[1], a[2] - q[2]];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let theta = if r == 0.0 { 0.0 } else { (d[2] / r).clamp(-1.0, 1.0).acos() };
        (r, theta)
    }

    /// CSV of atom positions with their coupling magnitudes in MHz.
    pub fn dump_csv(&self, v_m: &[C64]) -> String {
        let mut w = CsvWriter::new(&["x_um", "y_um", "z_um", "r_um", "abs_v_mhz"]);
        for (m, pos) in self.atom_positions.iter().enumerate() {
            let (r, _) = self.relative(m);
            w.row_f64(&[pos[0], pos[1], pos[2], r, to_mhz(v_m[m].norm())]);
        }
        w.finish()
    }
}

/// Angular factor of the Förster coupling.
#[derive(Debug, Clone, PartialEq)]
pub enum AngularMode {
    Isotropic,
    /// `(polar angle in rad, factor)` pairs sorted by angle; linear
    /// interpolation in between, clamped outside.
    Table(Vec<(f64, f64)>),
}

impl AngularMode {
    /// Parses `deg:factor` pairs separated by commas, e.g. `0:1, 90:-0.5, 180:1`.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut pts = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (a, f) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("angular table entry '{item}' is not deg:factor")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad number '{s}' in angular table")))
            };
            pts.push((parse(a)?.to_radians(), parse(f)?));
        }
        Self::table(pts)
    }

    pub fn table(mut pts: Vec<(f64, f64)>) -> Result<Self> {
        if pts.is_empty() {
            return Err(Error::InvalidInput("empty angular table".into()));
        }
        if pts.iter().any(|(a, f)| !a.is_finite() || !f.is_finite()) {
            return Err(Error::InvalidInput("non-finite angular table entry".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(AngularMode::Table(pts))
    }

    pub fn factor(&self, theta: f64) -> f64 {
        match self {
            AngularMode::Isotropic => 1.0,
            AngularMode::Table(pts) => {
                let first = pts[0];
                let last = pts[pts.len() - 1];
                if theta <= first.0 {
                    return first.1;
                }
                if theta >= last.0 {
                    return last.1;
                }
                let k = pts.partition_point(|p| p.0 <= theta);
                let (a0, f0) = pts[k - 1];
                let (a1, f1) = pts[k];
                f0 + (f1 - f0) * (theta - a0) / (a1 - a0)
            }
        }
    }
}

/// `V = c3 f(theta) / r^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForsterModel {
    /// Angular MHz um^3 (rad/us um^3).
    pub c3: f64,
    pub angular: AngularMode,
}

impl ForsterModel {
    pub fn isotropic(c3: f64) -> Self {
        ForsterModel { c3, angular: AngularMode::Isotropic }
    }
}

/// Förster coupling between the qubit and each ensemble atom.
pub fn forster_coupling(geom: &GateGeometry, model: &ForsterModel) -> Result<Vec<C64>> {
    if !(model.c3 > 0.0) {
        return Err(Error::InvalidInput(format!("c3 must be positive, got {}", model.c3)));
    }
    (0..geom.len())
        .map(|m| {
            let (r, theta) = geom.relative(m);
            if r == 0.0 {
                return Err(Error::Geometry(format!("qubit coincides with lattice site {m}")));
            }
            Ok(C64::new(model.c3 * model.angular.factor(theta) / (r * r * r), 0.0))
        })
        .collect()
}

/// Sign applied to every blockade shift `B_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockadeSign {
    #[default]
    Positive,
    Negative,
}

impl BlockadeSign {
    fn value(self) -> f64 {
        match self {
            BlockadeSign::Positive => 1.0,
            BlockadeSign::Negative => -1.0,
        }
    }
}

/// Per-atom data entering the blocked reflection coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Blockade {
    pub v_m: Vec<C64>,
    /// Relative coupling profile; `G_m = g_single * weight_m`. `None` means uniform.
    pub g_profile: Option<Vec<f64>>,
    pub sign: BlockadeSign,
}

impl Blockade {
    pub fn new(v_m: Vec<C64>) -> Self {
        Blockade { v_m, g_profile: None, sign: BlockadeSign::Positive }
    }

    pub fn len(&self) -> usize {
        self.v_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_m.is_empty()
    }

    /// Copy with every `V_m` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Blockade { v_m: self.v_m.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    fn g_sqr(&self, p: &PhysicalParams, m: usize) -> f64 {
        let w = self.g_profile.as_ref().map_or(1.0, |w| w[m]);
        (p.g_single * w).powi(2)
    }
}

/// Light shift, dressing factor, dressed two-photon detuning and blockade shifts at probe offset `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateQuantities {
    pub delta_ac: C64,
    pub eta: C64,
    pub delta_dr: C64,
    pub b_m: Vec<C64>,
}

fn check_elimination(p: &PhysicalParams, delta: f64) -> Result<()> {
    if p.delta_e + delta == 0.0 && p.gamma_e == 0.0 {
        return Err(Error::SingularElimination);
    }
    Ok(())
}

fn scalar_quantities(p: &PhysicalParams, delta: f64) -> Result<(C64, C64, C64)> {
    check_elimination(p, delta)?;
    let g2 = p.g_collective * p.g_collective;
    let om2 = p.omega_rabi.norm_sqr();
    let delta_ac = -g2 / C64::new(p.delta_e + delta, 0.5 * p.gamma_e);
    let d = C64::new(-0.5 * p.gamma_e, p.delta_e + delta);
    let eta = 0.25 * om2 / (d * d);
    let delta_dr = -p.delta_r - 0.25 * I * om2 / C64::new(0.5 * p.gamma_e, -p.delta_e - delta);
    debug_assert!(delta_ac.im >= -1e-12 * delta_ac.norm());
    Ok((delta_ac, eta, delta_dr))
}

fn blockade_shift(p: &PhysicalParams, delta: f64, v: C64, sign: BlockadeSign) -> C64 {
    sign.value() * v.norm_sqr() / C64::new(0.5 * p.gamma_p, p.delta_p - delta)
}

pub fn gate_quantities(p: &PhysicalParams, delta: f64, blockade: &Blockade) -> Result<GateQuantities> {
    let (delta_ac, eta, delta_dr) = scalar_quantities(p, delta)?;
    let b_m = blockade.v_m.iter().map(|v| blockade_shift(p, delta, *v, blockade.sign)).collect();
    Ok(GateQuantities { delta_ac, eta, delta_dr, b_m })
}

fn finish_reflection(kappa: f64, den: C64, delta: f64) -> Result<C64> {
    if den == C64::new(0.0, 0.0) || !den.is_finite() {
        return Err(Error::SingularResponse { delta });
    }
    Ok(1.0 - kappa / den)
}

fn checked_div(num: C64, den: C64, delta: f64) -> Result<C64> {
    if den == C64::new(0.0, 0.0) {
        return Err(Error::SingularResponse { delta });
    }
    Ok(num / den)
}

/// Reflection coefficient with the qubit in `|r'>`.
pub fn reflection_blocked(p: &PhysicalParams, delta: f64, blockade: &Blockade) -> Result<C64> {
    if let Some(w) = &blockade.g_profile {
        if w.len() != blockade.len() {
            return Err(Error::InvalidInput("coupling profile length differs from atom count".into()));
        }
    }
    let (delta_ac, eta, delta_dr) = scalar_quantities(p, delta)?;
    let base = C64::new(0.5 * p.gamma_r, -delta) + I * delta_dr;
    let mut sum = C64::new(0.0, 0.0);
    if eta != C64::new(0.0, 0.0) {
        for (m, v) in blockade.v_m.iter().enumerate() {
            let b = blockade_shift(p, delta, *v, blockade.sign);
            let g2 = blockade.g_sqr(p, m);
            // Uncoupled atoms and infinite shifts drop out of the sum.
            if g2 == 0.0 || !b.is_finite() {
                continue;
            }
            sum += checked_div(C64::new(g2, 0.0), base + b, delta)?;
        }
    }
    let den = C64::new(0.5 * p.kappa, -delta) - I * delta_ac - eta * sum;
    finish_reflection(p.kappa, den, delta)
}

/// Reflection coefficient with no stored qubit excitation.
pub fn reflection_unblocked(p: &PhysicalParams, delta: f64) -> Result<C64> {
    let (delta_ac, eta, delta_dr) = scalar_quantities(p, delta)?;
    let g2 = p.g_collective * p.g_collective;
    let inner = if g2 == 0.0 || eta == C64::new(0.0, 0.0) {
        C64::new(0.0, 0.0)
    } else {
        checked_div(C64::new(g2, 0.0), C64::new(0.5 * p.gamma_r, -delta) + I * delta_dr, delta)?
    };
    let den = C64::new(0.5 * p.kappa, -delta) - I * delta_ac - eta * inner;
    finish_reflection(p.kappa, den, delta)
}

/// Gate fidelity `|2 + R_unblocked - R_blocked|^2 / 16`.
pub fn fidelity(r_unblocked: C64, r_blocked: C64) -> f64 {
    (2.0 + r_unblocked - r_blocked).norm_sqr() / 16.0
}

/// Reflection pair and fidelity at probe offset `delta`.
pub fn evaluate(p: &PhysicalParams, delta: f64, blockade: &Blockade) -> Result<(C64, C64, f64)> {
    let ru = reflection_unblocked(p, delta)?;
    let rb = reflection_blocked(p, delta, blockade)?;
    Ok((ru, rb, fidelity(ru, rb)))
}

/// `delta_r` that zeroes the real part of the dressed two-photon detuning at `delta = 0`.
pub fn analytic_two_photon_resonance(p: &PhysicalParams) -> f64 {
    let om2 = p.omega_rabi.norm_sqr();
    if om2 == 0.0 {
        return 0.0;
    }
    (-0.25 * I * om2 / C64::new(0.5 * p.gamma_e, -p.delta_e)).re
}

/// Copy of `p` with `delta_r` set to the analytic two-photon resonance.
pub fn auto_two_photon_resonance(p: &PhysicalParams) -> PhysicalParams {
    PhysicalParams { delta_r: analytic_two_photon_resonance(p), ..p.clone() }
}

/// Outcome of the numerical resonance refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    pub params: PhysicalParams,
    pub fidelity: f64,
    /// False when the search could not bracket a maximum; `params` then holds the analytic value.
    pub bracketed: bool,
}

/// Maximizes the `delta = 0` fidelity over `delta_r` around the analytic value:
/// a 41-point grid locates the best cell, golden-section search refines it.
/// The result is never worse than the analytic starting point.
pub fn refine_two_photon_resonance(p: &PhysicalParams, blockade: &Blockade) -> Result<Resonance> {
    let analytic = auto_two_photon_resonance(p);
    let f_at = |dr: f64| -> f64 {
        let q = PhysicalParams { delta_r: dr, ..p.clone() };
        evaluate(&q, 0.0, blockade).map(|r| r.2).unwrap_or(f64::NEG_INFINITY)
    };
    let x0 = analytic.delta_r;
    let f0 = evaluate(&analytic, 0.0, blockade)?.2;
    let om2 = p.omega_rabi.norm_sqr();
    let scale = [p.kappa, p.gamma_r, p.gamma_e * om2 / (4.0 * p.delta_e * p.delta_e).max(f64::MIN_POSITIVE)]
        .into_iter()
        .filter(|x| x.is_finite())
        .fold(0.0, f64::max);
    let half = 10.0 * if scale > 0.0 { scale } else { 1.0 };
    const N: usize = 41;
    let xs: Vec<f64> = (0..N).map(|i| x0 - half + 2.0 * half * i as f64 / (N - 1) as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f_at(x)).collect();
    let best = (0..N).fold(N / 2, |b, i| if fs[i] > fs[b] { i } else { b });
    if best == 0 || best == N - 1 {
        return Ok(Resonance { params: analytic, fidelity: f0, bracketed: false });
    }
    let (mut a, mut b) = (xs[best - 1], xs[best + 1]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f_at(c), f_at(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (x0.abs() + half) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f_at(d);
        }
    }
    let mut cands = [(xs[best], fs[best]), (c, fc), (d, fd)];
    cands.sort_by(|u, v| v.1.total_cmp(&u.1));
    let (x, f) = cands[0];
    if f >= f0 {
        Ok(Resonance { params: PhysicalParams { delta_r: x, ..p.clone() }, fidelity: f, bracketed: true })
    } else {
        Ok(Resonance { params: analytic, fidelity: f0, bracketed: true })
    }
}

/// How `delta_r` is chosen at each scan point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResonanceMode {
    /// Use `delta_r` as given.
    Fixed,
    #[default]
    Analytic,
    Refined,
}

/// Names accepted as scan axes. Frequencies are in MHz; `v_scale` multiplies every `V_m`.
pub const AXIS_NAMES: &[&str] = &[
    "omega", "g", "g_single", "delta_e", "delta_r", "gamma_e", "gamma_r", "gamma_p", "kappa", "delta_p", "delta",
    "v_scale",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScanAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl ScanAxis {
    pub fn new(name: &str, values: Vec<f64>) -> Result<Self> {
        if !AXIS_NAMES.contains(&name) {
            return Err(Error::InvalidInput(format!("unknown scan axis '{name}' (allowed: {})", AXIS_NAMES.join(", "))));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("scan axis '{name}' has no values")));
        }
        Ok(ScanAxis { name: name.to_string(), values })
    }

    /// `start, stop, step` inclusive of `stop` up to rounding.
    pub fn range(name: &str, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step != 0.0) || ((stop - start) / step) < -1e-9 {
            return Err(Error::InvalidInput(format!("bad range for axis '{name}'")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Trim accumulated binary noise such as 0.09000000000000001.
        let clean = |x: f64| format!("{x:.12e}").parse::<f64>().unwrap_or(x);
        Self::new(name, (0..n).map(|i| clean(start + step * i as f64)).collect())
    }
}

/// A grid over parameter axes; the first axis varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub base: PhysicalParams,
    pub blockade: Blockade,
    pub axes: Vec<ScanAxis>,
    /// Probe offset (rad/us) unless `delta` is an axis.
    pub delta: f64,
    pub resonance: ResonanceMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub axis_values: Vec<f64>,
    pub r_unblocked: C64,
    pub r_blocked: C64,
    pub fidelity: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub axis_names: Vec<String>,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = self.axis_names.clone();
        h.extend(
            ["re_R_unblocked", "im_R_unblocked", "re_R_blocked", "im_R_blocked", "F_z", "status"].map(String::from),
        );
        h
    }

    pub fn to_csv(&self) -> String {
        let mut w = CsvWriter::new(&self.header());
        for row in &self.rows {
            let mut v = row.axis_values.clone();
            v.extend([row.r_unblocked.re, row.r_unblocked.im, row.r_blocked.re, row.r_blocked.im, row.fidelity]);
            w.row_with_status(&v, &row.status);
        }
        w.finish()
    }
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::SingularElimination => "singular_elimination",
        Error::SingularResponse { .. } => "singular_response",
        _ => "error",
    }
}

impl ScanSpec {
    fn n_points(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (k, ax) in self.axes.iter().enumerate().rev() {
            out[k] = ax.values[idx % ax.values.len()];
            idx /= ax.values.len();
        }
        out
    }

    fn evaluate_point(&self, values: &[f64]) -> ScanRow {
        let mut p = self.base.clone();
        let n_sqrt = (p.n_atoms as f64).sqrt();
        let mut delta = self.delta;
        let mut v_scale = 1.0;
        let mut mode = self.resonance;
        for (ax, &x) in self.axes.iter().zip(values) {
            match ax.name.as_str() {
                "omega" => p.omega_rabi = C64::from_polar(mhz(x), p.omega_rabi.arg()),
                "g" => {
                    p.g_collective = mhz(x);
                    p.g_single = mhz(x) / n_sqrt;
                }
                "g_single" => {
                    p.g_single = mhz(x);
                    p.g_collective = mhz(x) * n_sqrt;
                }
                "delta_e" => p.delta_e = mhz(x),
                "delta_r" => {
                    p.delta_r = mhz(x);
                    mode = ResonanceMode::Fixed;
                }
                "gamma_e" => p.gamma_e = mhz(x),
                "gamma_r" => p.gamma_r = mhz(x),
                "gamma_p" => p.gamma_p = mhz(x),
                "kappa" => p.kappa = mhz(x),
                "delta_p" => p.delta_p = mhz(x),
                "delta" => delta = mhz(x),
                "v_scale" => v_scale = x,
                other => unreachable!("axis {other} validated at construction"),
            }
        }
        let scaled;
        let blockade = if v_scale == 1.0 {
            &self.blockade
        } else {
            scaled = self.blockade.scaled(v_scale);
            &scaled
        };
        let mut status = "ok";
        let resolved = match mode {
            ResonanceMode::Fixed => Ok(p),
            ResonanceMode::Analytic => Ok(auto_two_photon_resonance(&p)),
            ResonanceMode::Refined => refine_two_photon_resonance(&p, blockade).map(|r| {
                if !r.bracketed {
                    status = "unbracketed";
                }
                r.params
            }),
        };
        let nan = C64::new(f64::NAN, f64::NAN);
        match resolved.and_then(|p| evaluate(&p, delta, blockade)) {
            Ok((ru, rb, f)) => ScanRow {
                axis_values: values.to_vec(),
                r_unblocked: ru,
                r_blocked: rb,
                fidelity: f,
                status: status.to_string(),
            },
            Err(e) => ScanRow {
                axis_values: values.to_vec(),
                r_unblocked: nan,
                r_blocked: nan,
                fidelity: f64::NAN,
                status: status_of(&e).to_string(),
            },
        }
    }
}

/// Evaluates every grid point. Singular points become rows with a status flag.
/// Row order follows the grid regardless of `workers`.
pub fn scan(spec: &ScanSpec, workers: Option<usize>) -> Result<ScanTable> {
    for ax in &spec.axes {
        ScanAxis::new(&ax.name, ax.values.clone())?;
    }
    spec.base.validate()?;
    let n = spec.n_points();
    let run = || (0..n).into_par_iter().map(|i| spec.evaluate_point(&spec.point(i))).collect::<Vec<_>>();
    let rows = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(ScanTable { axis_names: spec.axes.iter().map(|a| a.name.clone()).collect(), rows })
}

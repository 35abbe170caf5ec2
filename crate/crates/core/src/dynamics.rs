//! Single-excitation dynamics of the collectively coupled ensemble: the full
//! three-amplitude equations of motion with cavity and atomic decay, and the
//! two-amplitude model with the intermediate state adiabatically eliminated.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::csv::CsvWriter;
use crate::error::{Error, Result};
use crate::params::{PhysicalParams, SingleExcState};
use crate::rk4::Rk4;

const I: C64 = C64::new(0.0, 1.0);

/// Time derivative of `(c_b, c_e, c_r)` under the full model.
pub fn eom_full(s: &SingleExcState, p: &PhysicalParams) -> SingleExcState {
    let g = p.g_collective;
    let om = p.omega_rabi;
    SingleExcState {
        c_b: g * s.c_e - 0.5 * p.kappa * s.c_b,
        c_e: -g * s.c_b + I * om.conj() * 0.5 * s.c_r + I * p.delta_e * s.c_e - 0.5 * p.gamma_e * s.c_e,
        c_r: I * om * 0.5 * s.c_e + I * p.delta_r * s.c_r - 0.5 * p.gamma_r * s.c_r,
    }
}

/// `delta_e + i gamma_e / 2`, the complex intermediate-state detuning.
fn elimination_denominator(p: &PhysicalParams) -> Result<C64> {
    if p.delta_e == 0.0 && p.gamma_e == 0.0 {
        return Err(Error::SingularElimination);
    }
    Ok(C64::new(p.delta_e, 0.5 * p.gamma_e))
}

/// Effective photon-Rydberg coupling `G Omega* / (2 (delta_e + i gamma_e/2))`.
pub fn effective_coupling(p: &PhysicalParams) -> Result<C64> {
    let den = elimination_denominator(p)?;
    Ok(p.g_collective * p.omega_rabi.conj() / (2.0 * den))
}

/// Linear coefficients of the eliminated model, `d/dt (c_b, c_r) = A (c_b, c_r)`.
#[derive(Debug, Clone, Copy)]
struct AdiabaticMatrix {
    bb: C64,
    br: C64,
    rb: C64,
    rr: C64,
}

impl AdiabaticMatrix {
    fn new(p: &PhysicalParams) -> Result<Self> {
        let den = elimination_denominator(p)?;
        let g = p.g_collective;
        let om = p.omega_rabi;
        Ok(AdiabaticMatrix {
            bb: -I * g * g / den - 0.5 * p.kappa,
            br: -g * om.conj() / (2.0 * den),
            rb: g * om / (2.0 * den),
            // Gamma_r is carried over from the full model.
            rr: -I * om.norm_sqr() / (4.0 * den) + I * p.delta_r - 0.5 * p.gamma_r,
        })
    }

    fn apply(&self, c_b: C64, c_r: C64) -> (C64, C64) {
        (self.bb * c_b + self.br * c_r, self.rb * c_b + self.rr * c_r)
    }
}

/// Time derivative of `(c_b, c_r)` with the intermediate state eliminated.
pub fn eom_adiabatic(c_b: C64, c_r: C64, p: &PhysicalParams) -> Result<(C64, C64)> {
    Ok(AdiabaticMatrix::new(p)?.apply(c_b, c_r))
}

/// Intermediate amplitude slaved to `(c_b, c_r)` in the eliminated model.
pub fn slaved_intermediate(c_b: C64, c_r: C64, p: &PhysicalParams) -> Result<C64> {
    elimination_denominator(p)?;
    let den = C64::new(-0.5 * p.gamma_e, p.delta_e);
    Ok((p.g_collective * c_b - I * p.omega_rabi.conj() * 0.5 * c_r) / den)
}

/// Warns when `|delta_e| < 5 max(G, |Omega|)`, where elimination is questionable.
pub fn adiabatic_validity_warning(p: &PhysicalParams) -> Option<String> {
    let scale = p.g_collective.max(p.omega_rabi.norm());
    (p.delta_e.abs() < 5.0 * scale).then(|| {
        format!(
            "adiabatic elimination questionable: |delta_e| = {:.4} rad/us < 5 * max(G, |Omega|) = {:.4} rad/us",
            p.delta_e.abs(),
            5.0 * scale
        )
    })
}

/// Largest permitted RK4 step: fifty steps per cycle of the fastest of
/// `|delta_e|`, `|Omega|`, `G`, `kappa`.
pub fn max_step(p: &PhysicalParams) -> f64 {
    let w = p.delta_e.abs().max(p.omega_rabi.norm()).max(p.g_collective).max(p.kappa);
    if w == 0.0 {
        f64::INFINITY
    } else {
        TAU / (50.0 * w)
    }
}

/// Which equations of motion to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Full,
    Adiabatic,
}

/// Time grid settings for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Record every `stride` steps.
    pub stride: usize,
}

impl IntegrateOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        IntegrateOptions { t_end, dt, stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Sampled single-excitation trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SingleExcState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn pop_b(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.c_b.norm_sqr()).collect()
    }

    pub fn pop_e(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.c_e.norm_sqr()).collect()
    }

    pub fn pop_r(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.c_r.norm_sqr()).collect()
    }

    pub const CSV_HEADER: [&'static str; 10] =
        ["t_us", "pop_b", "pop_e", "pop_r", "re_cb", "im_cb", "re_ce", "im_ce", "re_cr", "im_cr"];

    pub fn to_csv(&self) -> String {
        let mut w = CsvWriter::new(&Self::CSV_HEADER);
        for (t, s) in self.times.iter().zip(&self.states) {
            let [pb, pe, pr] = s.populations();
            w.row_f64(&[*t, pb, pe, pr, s.c_b.re, s.c_b.im, s.c_e.re, s.c_e.im, s.c_r.re, s.c_r.im]);
        }
        w.finish()
    }
}

/// Fixed-step RK4 integration from `state0` over `[0, t_end]`.
///
/// For [`Model::Adiabatic`] the stored `c_e` is the slaved intermediate amplitude.
pub fn integrate(
    state0: SingleExcState,
    p: &PhysicalParams,
    opts: IntegrateOptions,
    model: Model,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and t_end >= 0, got dt = {}, t_end = {}",
            opts.dt, opts.t_end
        )));
    }
    let max_dt = max_step(p);
    if opts.dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepSizeTooLarge { dt: opts.dt, max_dt });
    }
    let n = opts.n_steps();
    let stride = opts.stride.max(1);
    let cap = n / stride + 1;
    let mut times = Vec::with_capacity(cap);
    let mut states = Vec::with_capacity(cap);
    times.push(0.0);
    states.push(state0);

    match model {
        Model::Full => {
            let mut y = state0.to_array().to_vec();
            let mut rk = Rk4::new(3);
            for step in 1..=n {
                rk.step(&mut y, opts.dt, |y, out| {
                    let d = eom_full(&SingleExcState::new(y[0], y[1], y[2]), p);
                    out.copy_from_slice(&d.to_array());
                });
                if step % stride == 0 {
                    times.push(step as f64 * opts.dt);
                    states.push(SingleExcState::new(y[0], y[1], y[2]));
                }
            }
        }
        Model::Adiabatic => {
            let a = AdiabaticMatrix::new(p)?;
            let mut y = vec![state0.c_b, state0.c_r];
            let mut rk = Rk4::new(2);
            // The stored t = 0 state keeps the caller's c_e; later samples are slaved.
            for step in 1..=n {
                rk.step(&mut y, opts.dt, |y, out| {
                    let (db, dr) = a.apply(y[0], y[1]);
                    out[0] = db;
                    out[1] = dr;
                });
                if step % stride == 0 {
                    times.push(step as f64 * opts.dt);
                    let c_e = slaved_intermediate(y[0], y[1], p)?;
                    states.push(SingleExcState::new(y[0], c_e, y[1]));
                }
            }
        }
    }
    Ok(Trajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::mhz;

    const ZERO: C64 = C64::new(0.0, 0.0);
    const ONE: C64 = C64::new(1.0, 0.0);

    fn strong_coupling() -> PhysicalParams {
        PhysicalParams {
            omega_rabi: C64::new(mhz(20.0), 0.0),
            delta_e: mhz(200.0),
            gamma_e: mhz(1.0),
            gamma_r: mhz(0.01),
            kappa: mhz(0.5),
            ..Default::default()
        }
        .with_collective_coupling(mhz(10.0))
    }

    fn weak_coupling() -> PhysicalParams {
        PhysicalParams { omega_rabi: C64::new(mhz(5.0), 0.0), ..strong_coupling() }.with_collective_coupling(mhz(2.5))
    }

    #[test]
    fn bare_cavity_derivative() {
        let p = PhysicalParams { kappa: 2.0, ..Default::default() };
        let d = eom_full(&SingleExcState::photon_loaded(), &p);
        assert_eq!(d.c_b, C64::new(-1.0, 0.0));
    }

    #[test]
    fn closed_derivative_from_intermediate() {
        let p = PhysicalParams { omega_rabi: C64::new(3.0, 0.0), ..Default::default() }
            .with_collective_coupling(2.0);
        let d = eom_full(&SingleExcState::new(ZERO, ONE, ZERO), &p);
        assert_eq!(d.c_b, C64::new(2.0, 0.0));
        assert_eq!(d.c_r, C64::new(0.0, 1.5));
    }

    #[test]
    fn strong_coupling_photon_derivative() {
        let d = eom_full(&SingleExcState::photon_loaded(), &strong_coupling());
        assert!((d.c_e - C64::new(-mhz(10.0), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn adiabatic_without_drive() {
        let p = PhysicalParams { omega_rabi: ZERO, ..strong_coupling() };
        let (db, dr) = eom_adiabatic(ONE, ZERO, &p).unwrap();
        let g = p.g_collective;
        let expect = -I * g * g / C64::new(p.delta_e, 0.5 * p.gamma_e) - 0.5 * p.kappa;
        assert!((db - expect).norm() < 1e-12);
        assert_eq!(dr, ZERO);
    }

    #[test]
    fn adiabatic_rydberg_stark_term() {
        let p = PhysicalParams { gamma_e: 0.0, gamma_r: 0.0, ..strong_coupling() };
        let (_, dr) = eom_adiabatic(ZERO, ONE, &p).unwrap();
        let expect = -I * p.omega_rabi.norm_sqr() / (4.0 * p.delta_e);
        assert!((dr - expect).norm() < 1e-12);
    }

    #[test]
    fn effective_coupling_strong_set() {
        let p = PhysicalParams { gamma_e: 0.0, ..strong_coupling() };
        // 2pi*10 * 2pi*20 / (2 * 2pi*200) = 2pi*0.5
        let g = effective_coupling(&p).unwrap();
        assert!((g - C64::new(mhz(0.5), 0.0)).norm() < 1e-12);
        let p0 = PhysicalParams { omega_rabi: ZERO, ..p };
        assert_eq!(effective_coupling(&p0).unwrap(), ZERO);
    }

    #[test]
    fn effective_coupling_lossy_limit() {
        let base = PhysicalParams { delta_e: 1.0, gamma_e: 0.0, ..strong_coupling() };
        let lossy = PhysicalParams { gamma_e: 1e6, ..base.clone() };
        let g = effective_coupling(&lossy).unwrap();
        let mag = base.g_collective * base.omega_rabi.norm() / lossy.gamma_e;
        assert!((g.norm() - mag).abs() < 1e-5 * mag);
        let ref_phase = effective_coupling(&base).unwrap().arg();
        let dphi = g.arg() - ref_phase;
        assert!((dphi + std::f64::consts::FRAC_PI_2).abs() < 1e-5, "{dphi}");
    }

    #[test]
    fn singular_elimination() {
        let p = PhysicalParams { delta_e: 0.0, gamma_e: 0.0, ..strong_coupling() };
        assert_eq!(effective_coupling(&p), Err(Error::SingularElimination));
        assert_eq!(eom_adiabatic(ONE, ZERO, &p), Err(Error::SingularElimination));
    }

    #[test]
    fn validity_warning_threshold() {
        assert!(adiabatic_validity_warning(&strong_coupling()).is_none());
        let p = PhysicalParams { delta_e: mhz(50.0), ..strong_coupling() };
        assert!(adiabatic_validity_warning(&p).is_some());
    }

    #[test]
    fn bare_decay_matches_exponential() {
        let p = PhysicalParams { kappa: mhz(0.5), ..Default::default() };
        let tr = integrate(SingleExcState::photon_loaded(), &p, IntegrateOptions::new(3.0, 1e-3), Model::Full)
            .unwrap();
        for (t, pb) in tr.times.iter().zip(tr.pop_b()) {
            let exact = (-p.kappa * t).exp();
            assert!((pb - exact).abs() <= 1e-6 * exact, "t = {t}");
        }
    }

    #[test]
    fn step_too_large_rejected() {
        let err = integrate(SingleExcState::photon_loaded(), &strong_coupling(), IntegrateOptions::new(1.0, 1e-3), Model::Full)
            .unwrap_err();
        assert!(matches!(err, Error::StepSizeTooLarge { .. }));
        // Default step for these parameters is accepted.
        integrate(SingleExcState::photon_loaded(), &strong_coupling(), IntegrateOptions::new(1e-3, 1e-4), Model::Full).unwrap();
    }

    #[test]
    fn initial_condition_kept_and_stride() {
        let tr = integrate(
            SingleExcState::photon_loaded(),
            &strong_coupling(),
            IntegrateOptions::new(0.1, 1e-4).with_stride(100),
            Model::Full,
        )
        .unwrap();
        assert_eq!(tr.len(), 11);
        assert_eq!(tr.states[0], SingleExcState::photon_loaded());
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn weak_set_stays_overdamped() {
        let tr = integrate(
            SingleExcState::photon_loaded(),
            &weak_coupling(),
            IntegrateOptions::new(10.0, 1e-4).with_stride(10),
            Model::Full,
        )
        .unwrap();
        let peak = tr.pop_r().into_iter().fold(0.0, f64::max);
        assert!(peak < 0.1, "peak {peak}");
    }

    #[test]
    fn norm_conserved_without_loss() {
        let p = PhysicalParams { gamma_e: 0.0, gamma_r: 0.0, kappa: 0.0, ..strong_coupling() };
        let tr = integrate(
            SingleExcState::photon_loaded(),
            &p,
            IntegrateOptions::new(1.0, 1e-5).with_stride(1000),
            Model::Full,
        )
        .unwrap();
        assert_eq!(tr.times.last().copied(), Some(1.0));
        for s in &tr.states {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-8, "{}", s.norm_sqr());
        }
    }

    #[test]
    fn halving_step_converged() {
        let run = |dt: f64, stride| {
            integrate(
                SingleExcState::photon_loaded(),
                &strong_coupling(),
                IntegrateOptions::new(2.0, dt).with_stride(stride),
                Model::Full,
            )
            .unwrap()
        };
        let a = run(1e-4, 100);
        let b = run(5e-5, 200);
        assert_eq!(a.len(), b.len());
        for (sa, sb) in a.states.iter().zip(&b.states) {
            for (x, y) in sa.populations().iter().zip(sb.populations()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let tr = integrate(
            SingleExcState::photon_loaded(),
            &strong_coupling(),
            IntegrateOptions::new(0.001, 1e-4).with_stride(5),
            Model::Adiabatic,
        )
        .unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t_us,pop_b,pop_e,pop_r,re_cb,im_cb,re_ce,im_ce,re_cr,im_cr");
        assert_eq!(lines.count(), 3);
    }
}

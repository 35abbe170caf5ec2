//! Dense-oracle check suite run by `rydcav oracle-check`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::dynamics::{integrate, IntegrateOptions, Model};
use crate::error::Result;
use crate::gate::{auto_two_photon_resonance, reflection_blocked, reflection_unblocked, Blockade};
use crate::oracle::*;
use crate::params::{mhz, PhysicalParams, SingleExcState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Expected disagreement with the reduced model, reported but not a failure.
    Deviation,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Deviation => "deviation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Measured discrepancy (or ratio, for the blockade check).
    pub value: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn below(name: &'static str, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        CheckResult { name, status, value, tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Atom count for the collective-coupling check.
    pub n_atoms: usize,
    pub cutoff: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { n_atoms: 3, cutoff: 1 }
    }
}

fn loaded(spec: &FullSystemSpec, photons: usize) -> DVector<C64> {
    let b = spec.basis();
    let mut psi = DVector::zeros(b.dim());
    psi[b.index(&vec![G; spec.n_atoms], photons)] = C64::new(1.0, 0.0);
    psi
}

fn worst_population_gap(basis: &Basis, dense: &[DVector<C64>], reduced: &[SingleExcState], levels: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for (psi, s) in dense.iter().zip(reduced) {
        let a = collective_populations(basis, psi);
        let b = s.populations();
        for &k in levels {
            worst = worst.max((a[k] - b[k]).abs());
        }
    }
    worst
}

/// Largest population difference between the dense ensemble and the reduced
/// collective model for one loaded photon, strong interaction, no loss.
pub fn collective_gap(n_atoms: usize, cutoff: usize) -> Result<f64> {
    let g0 = mhz(5.0);
    let p = PhysicalParams { omega_rabi: C64::new(mhz(20.0), 0.0), delta_e: mhz(30.0), ..Default::default() }
        .with_uniform_coupling(g0, n_atoms);
    let spec = FullSystemSpec::uniform(n_atoms, g0, mhz(1e6), cutoff.max(1))?;
    let h = build_hamiltonian(&spec, &p)?;
    let dense = evolve_dense(&h, &loaded(&spec, 1), 3.0, 1e-3, Propagation::Exact)?;
    let reduced = integrate(
        SingleExcState::photon_loaded(),
        &p,
        IntegrateOptions::new(3.0, 1e-4).with_stride(10),
        Model::Full,
    )?;
    Ok(worst_population_gap(&spec.basis(), &dense.states, &reduced.states, &[0, 1, 2]))
}

fn adiabatic_gap() -> Result<f64> {
    let g = mhz(5.0);
    let p = PhysicalParams { omega_rabi: C64::new(2.0 * g, 0.0), delta_e: 40.0 * g, ..Default::default() }
        .with_collective_coupling(g);
    let spec = FullSystemSpec::uniform(1, g, 0.0, 1)?;
    let h = build_hamiltonian(&spec, &p)?;
    let dense = evolve_dense(&h, &loaded(&spec, 1), 10.0, 1e-2, Propagation::Exact)?;
    let ad = integrate(
        SingleExcState::photon_loaded(),
        &p,
        IntegrateOptions::new(10.0, 1e-4).with_stride(100),
        Model::Adiabatic,
    )?;
    Ok(worst_population_gap(&spec.basis(), &dense.states, &ad.states, &[0, 2]))
}

fn cavity_decay_gap() -> Result<f64> {
    let p = PhysicalParams { kappa: mhz(0.5), ..Default::default() };
    let spec = FullSystemSpec::uniform(1, 0.0, 0.0, 3)?;
    let b = spec.basis();
    let h = build_hamiltonian(&spec, &p)?;
    let tr = lindblad_evolve(&h, &collapse_operators(&spec, &p), &projector(&loaded(&spec, 2)), 2.0, 1e-3, 100)?;
    Ok(tr
        .times
        .iter()
        .zip(&tr.rhos)
        .map(|(t, rho)| (photon_and_rydberg(&b, rho).0 - 2.0 * (-p.kappa * t).exp()).abs())
        .fold(0.0, f64::max))
}

fn gate_params(n: usize) -> PhysicalParams {
    auto_two_photon_resonance(
        &PhysicalParams {
            omega_rabi: C64::new(mhz(10.0), 0.0),
            delta_e: mhz(50.0),
            gamma_e: mhz(1.0),
            gamma_r: mhz(0.1),
            gamma_p: mhz(0.1),
            kappa: mhz(1.0),
            delta_p: mhz(0.5),
            ..Default::default()
        }
        .with_uniform_coupling(mhz(1.0), n),
    )
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-3)
}

fn weak_probe_gap() -> Result<f64> {
    let p = gate_params(2);
    let v = vec![C64::new(mhz(5.0), 0.0), C64::new(mhz(8.0), mhz(1.0))];
    let ens = FullSystemSpec::uniform(2, p.g_single, 0.0, 1)?;
    let blocked = GateSystemSpec::new(ens.clone(), v.clone())?;
    let free = GateSystemSpec::new(ens, vec![C64::new(0.0, 0.0); 2])?;
    let rb = rel(dense_gate_reflection(&blocked, &p, 0.0)?, reflection_blocked(&p, 0.0, &Blockade::new(v))?);
    let ru = rel(dense_gate_reflection(&free, &p, 0.0)?, reflection_unblocked(&p, 0.0)?);
    Ok(rb.max(ru))
}

fn finite_drive_gap() -> Result<f64> {
    let p = gate_params(1);
    let spec = FullSystemSpec::uniform(1, p.g_collective, 0.0, 2)?;
    Ok(rel(driven_reflection(&spec, &p, 0.0, 1e-3 * p.kappa)?, reflection_unblocked(&p, 0.0)?))
}

fn forster_gap() -> Result<f64> {
    let v = mhz(40.0);
    let spec = GateSystemSpec::new(FullSystemSpec::uniform(1, 0.0, 0.0, 0)?, vec![C64::new(v, 0.0)])?;
    let h = build_gate_hamiltonian(&spec, &PhysicalParams::default())?;
    let ev = h.symmetric_eigen().eigenvalues;
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo + v).abs().max((hi - v).abs()))
}

/// Double-Rydberg population after 1 us from two photons, for pair interaction `v`.
pub fn two_photon_leakage(v: f64) -> Result<f64> {
    let g0 = mhz(2.0);
    let p = PhysicalParams { omega_rabi: C64::new(mhz(20.0), 0.0), delta_e: mhz(20.0), ..Default::default() }
        .with_uniform_coupling(g0, 2);
    let spec = FullSystemSpec::uniform(2, g0, v, 2)?;
    let h = build_hamiltonian(&spec, &p)?;
    let tr = evolve_dense(&h, &loaded(&spec, 2), 1.0, 1.0, Propagation::Exact)?;
    Ok(double_rydberg_population(&spec.basis(), &tr.states[1]))
}

fn hermiticity(n_atoms: usize, cutoff: usize) -> Result<f64> {
    let couplings: Vec<C64> = (0..n_atoms).map(|k| C64::from_polar(mhz(1.0 + k as f64), 0.7 * k as f64)).collect();
    let inter = DMatrix::from_fn(n_atoms, n_atoms, |i, j| if i == j { 0.0 } else { mhz(10.0 * (1 + i + j) as f64) });
    let spec = FullSystemSpec::new(couplings, inter, cutoff)?;
    let p = PhysicalParams {
        omega_rabi: C64::new(mhz(3.0), mhz(1.0)),
        delta_e: mhz(7.0),
        delta_r: mhz(-0.5),
        ..Default::default()
    };
    Ok(hermiticity_defect(&build_hamiltonian(&spec, &p)?))
}

/// Runs every check. Dimension-cap violations in the requested sizes are returned as errors.
pub fn run_suite(opts: SuiteOptions) -> Result<Vec<CheckResult>> {
    FullSystemSpec::uniform(opts.n_atoms, 0.0, 0.0, opts.cutoff)?;
    let mut out = vec![
        CheckResult::below("hermiticity", hermiticity(opts.n_atoms, opts.cutoff)?, 1e-12),
        CheckResult::below("collective_enhancement", collective_gap(opts.n_atoms, opts.cutoff)?, 1e-3),
        CheckResult::below("adiabatic_elimination", adiabatic_gap()?, 0.02),
        CheckResult::below("lindblad_cavity_decay", cavity_decay_gap()?, 1e-6),
        CheckResult::below("weak_probe_reflection_n2", weak_probe_gap()?, 0.01),
        CheckResult::below("finite_drive_reflection_n1", finite_drive_gap()?, 0.01),
        CheckResult::below("forster_doublet", forster_gap()?, 1e-9),
    ];
    let free = two_photon_leakage(0.0)?;
    let blocked = two_photon_leakage(mhz(1e5))?;
    let ratio = (free / blocked).sqrt();
    out.push(CheckResult {
        name: "blockade_amplitude_ratio",
        status: if ratio > 1e3 { CheckStatus::Pass } else { CheckStatus::Fail },
        value: ratio,
        tolerance: 1e3,
    });
    // Without interaction the reduced single-excitation model misses |rr> entirely.
    out.push(CheckResult {
        name: "unblocked_double_rydberg_leakage",
        status: CheckStatus::Deviation,
        value: free,
        tolerance: 0.0,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn default_suite_passes() {
        let res = run_suite(SuiteOptions::default()).unwrap();
        assert!(res.iter().all(|r| r.status != CheckStatus::Fail), "{res:?}");
        assert!(res.iter().any(|r| r.status == CheckStatus::Deviation));
    }

    #[test]
    fn five_atoms_hit_cap() {
        let err = run_suite(SuiteOptions { n_atoms: 5, cutoff: 1 }).unwrap_err();
        assert!(matches!(err, Error::DimensionExceeded { .. }));
    }
}

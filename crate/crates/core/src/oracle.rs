//! Brute-force dense models on small Hilbert spaces: the full many-atom
//! Hamiltonian, the Förster gate Hamiltonian, Schrödinger and Lindblad
//! evolution, and weak-probe reflection.
//!
//! Basis ordering: atom levels form mixed-radix digits (first atom most
//! significant), the photon number is the fastest index.
//! Atom levels: `g = 0, e = 1, r = 2, p = 3`; qubit levels `r' = 0, p' = 1`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::params::{FockLadderState, PhysicalParams};

pub const MAX_ATOMS: usize = 4;
pub const MAX_CUTOFF: usize = 8;
pub const MAX_DIM: usize = 729;
/// Allowed trace drift of Lindblad evolution.
pub const TRACE_TOL: f64 = 1e-8;
/// Smallest eigenvalue of rho tolerated before positivity is flagged.
pub const POSITIVITY_FLOOR: f64 = -1e-6;

pub const G: usize = 0;
pub const E: usize = 1;
pub const R: usize = 2;
pub const P: usize = 3;
pub const QUBIT_R: usize = 0;
pub const QUBIT_P: usize = 1;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Mixed-radix product basis of atoms (each with its own level count) times a photon ladder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub levels: Vec<usize>,
    pub cutoff: usize,
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.levels.iter().product::<usize>() * (self.cutoff + 1)
    }

    pub fn index(&self, digits: &[usize], n: usize) -> usize {
        let mut a = 0;
        for (d, l) in digits.iter().zip(&self.levels) {
            a = a * l + d;
        }
        a * (self.cutoff + 1) + n
    }

    pub fn decode(&self, mut idx: usize) -> (Vec<usize>, usize) {
        let n = idx % (self.cutoff + 1);
        idx /= self.cutoff + 1;
        let mut digits = vec![0; self.levels.len()];
        for k in (0..self.levels.len()).rev() {
            digits[k] = idx % self.levels[k];
            idx /= self.levels[k];
        }
        (digits, n)
    }

    /// Photon annihilation operator.
    pub fn annihilation(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        for j in 0..d {
            let n = j % (self.cutoff + 1);
            if n > 0 {
                a[(j - 1, j)] = C64::new((n as f64).sqrt(), 0.0);
            }
        }
        a
    }

    /// `|to><from|` on atom `site`, identity elsewhere.
    pub fn transition(&self, site: usize, from: usize, to: usize) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            let (mut digits, n) = self.decode(j);
            if digits[site] == from {
                digits[site] = to;
                m[(self.index(&digits, n), j)] = C64::new(1.0, 0.0);
            }
        }
        m
    }

    /// Diagonal of photon number plus excited (non-ground) ensemble atoms.
    /// Sites listed in `skip` (e.g. the gate qubit) are not counted.
    pub fn excitation_number(&self, skip: &[usize]) -> Vec<usize> {
        (0..self.dim())
            .map(|j| {
                let (digits, n) = self.decode(j);
                n + digits.iter().enumerate().filter(|(k, d)| !skip.contains(k) && **d != G).count()
            })
            .collect()
    }
}

/// Ensemble of `n_atoms` three-level atoms in a truncated cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSystemSpec {
    pub n_atoms: usize,
    /// Per-atom coupling `G_n` (rad/us).
    pub couplings: Vec<C64>,
    /// Symmetric pair interaction between Rydberg atoms (rad/us), zero diagonal.
    pub interactions: DMatrix<f64>,
    pub cutoff: usize,
}

impl FullSystemSpec {
    pub fn new(couplings: Vec<C64>, interactions: DMatrix<f64>, cutoff: usize) -> Result<Self> {
        let n = couplings.len();
        if n == 0 || n > MAX_ATOMS {
            return Err(Error::DimensionExceeded { dim: n, cap: MAX_ATOMS });
        }
        if cutoff > MAX_CUTOFF {
            return Err(Error::DimensionExceeded { dim: cutoff, cap: MAX_CUTOFF });
        }
        if interactions.nrows() != n || interactions.ncols() != n {
            return Err(Error::InvalidInput(format!("interaction matrix must be {n}x{n}")));
        }
        for i in 0..n {
            if interactions[(i, i)] != 0.0 {
                return Err(Error::InvalidInput("interaction matrix needs a zero diagonal".into()));
            }
            for j in 0..i {
                if interactions[(i, j)] != interactions[(j, i)] {
                    return Err(Error::InvalidInput("interaction matrix must be symmetric".into()));
                }
            }
        }
        let spec = FullSystemSpec { n_atoms: n, couplings, interactions, cutoff };
        let dim = spec.basis().dim();
        if dim > MAX_DIM {
            return Err(Error::DimensionExceeded { dim, cap: MAX_DIM });
        }
        Ok(spec)
    }

    /// Identical couplings `g0` and the same interaction `v` between every pair.
    pub fn uniform(n_atoms: usize, g0: f64, v: f64, cutoff: usize) -> Result<Self> {
        let inter = DMatrix::from_fn(n_atoms, n_atoms, |i, j| if i == j { 0.0 } else { v });
        Self::new(vec![C64::new(g0, 0.0); n_atoms], inter, cutoff)
    }

    pub fn basis(&self) -> Basis {
        Basis { levels: vec![3; self.n_atoms], cutoff: self.cutoff }
    }

    pub fn dim(&self) -> usize {
        self.basis().dim()
    }
}

fn add_atom_terms(h: &mut DMatrix<C64>, basis: &Basis, atoms: usize, g_n: &[C64], p: &PhysicalParams) {
    for j in 0..basis.dim() {
        let (digits, n) = basis.decode(j);
        for k in 0..atoms {
            match digits[k] {
                G if n > 0 => {
                    let mut t = digits.clone();
                    t[k] = E;
                    let i = basis.index(&t, n - 1);
                    let c = -I * g_n[k] * (n as f64).sqrt();
                    h[(i, j)] += c;
                    h[(j, i)] += c.conj();
                }
                E => {
                    h[(j, j)] -= p.delta_e;
                    let mut t = digits.clone();
                    t[k] = R;
                    let i = basis.index(&t, n);
                    h[(i, j)] += -0.5 * p.omega_rabi;
                    h[(j, i)] += -0.5 * p.omega_rabi.conj();
                }
                R => h[(j, j)] -= p.delta_r,
                _ => {}
            }
        }
    }
}

fn add_interactions(h: &mut DMatrix<C64>, basis: &Basis, v: &DMatrix<f64>) {
    let n = v.nrows();
    for j in 0..basis.dim() {
        let (digits, _) = basis.decode(j);
        for a in 0..n {
            for b in a + 1..n {
                if digits[a] == R && digits[b] == R {
                    h[(j, j)] += v[(a, b)];
                }
            }
        }
    }
}

/// Full many-atom Hamiltonian (units of hbar, rad/us).
pub fn build_hamiltonian(spec: &FullSystemSpec, p: &PhysicalParams) -> Result<DMatrix<C64>> {
    let basis = spec.basis();
    let d = basis.dim();
    if d > MAX_DIM {
        return Err(Error::DimensionExceeded { dim: d, cap: MAX_DIM });
    }
    let mut h = DMatrix::zeros(d, d);
    add_atom_terms(&mut h, &basis, spec.n_atoms, &spec.couplings, p);
    add_interactions(&mut h, &basis, &spec.interactions);
    Ok(h)
}

/// `sqrt(gamma_e)|g><e|`, `sqrt(gamma_r)|g><r|` per atom and `sqrt(kappa) a`; zero rates are omitted.
pub fn collapse_operators(spec: &FullSystemSpec, p: &PhysicalParams) -> Vec<DMatrix<C64>> {
    let basis = spec.basis();
    let mut ops = Vec::new();
    for k in 0..spec.n_atoms {
        if p.gamma_e > 0.0 {
            ops.push(basis.transition(k, E, G) * C64::new(p.gamma_e.sqrt(), 0.0));
        }
        if p.gamma_r > 0.0 {
            ops.push(basis.transition(k, R, G) * C64::new(p.gamma_r.sqrt(), 0.0));
        }
    }
    if p.kappa > 0.0 {
        ops.push(basis.annihilation() * C64::new(p.kappa.sqrt(), 0.0));
    }
    ops
}

/// Ensemble atoms with `{g, e, r, p}` plus a qubit atom with `{r', p'}` coupled by Förster terms.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSystemSpec {
    pub ensemble: FullSystemSpec,
    /// Förster coupling `V_n` of each ensemble atom to the qubit.
    pub v_n: Vec<C64>,
}

impl GateSystemSpec {
    pub fn new(ensemble: FullSystemSpec, v_n: Vec<C64>) -> Result<Self> {
        if v_n.len() != ensemble.n_atoms {
            return Err(Error::InvalidInput("need one Förster coupling per ensemble atom".into()));
        }
        let s = GateSystemSpec { ensemble, v_n };
        let dim = s.basis().dim();
        if dim > MAX_DIM {
            return Err(Error::DimensionExceeded { dim, cap: MAX_DIM });
        }
        Ok(s)
    }

    pub fn basis(&self) -> Basis {
        let mut levels = vec![4; self.ensemble.n_atoms];
        levels.push(2);
        Basis { levels, cutoff: self.ensemble.cutoff }
    }

    fn qubit_site(&self) -> usize {
        self.ensemble.n_atoms
    }
}

/// Gate Hamiltonian with Förster exchange `|r_n r'> <-> |p_n p'>` and pair penalty `delta_p`.
pub fn build_gate_hamiltonian(spec: &GateSystemSpec, p: &PhysicalParams) -> Result<DMatrix<C64>> {
    let basis = spec.basis();
    let d = basis.dim();
    if d > MAX_DIM {
        return Err(Error::DimensionExceeded { dim: d, cap: MAX_DIM });
    }
    let na = spec.ensemble.n_atoms;
    let q = spec.qubit_site();
    let mut h = DMatrix::zeros(d, d);
    add_atom_terms(&mut h, &basis, na, &spec.ensemble.couplings, p);
    add_interactions(&mut h, &basis, &spec.ensemble.interactions);
    for j in 0..d {
        let (digits, n) = basis.decode(j);
        for k in 0..na {
            if digits[k] == P && digits[q] == QUBIT_P {
                h[(j, j)] += p.delta_p;
                let mut t = digits.clone();
                t[k] = R;
                t[q] = QUBIT_R;
                let i = basis.index(&t, n);
                h[(i, j)] += spec.v_n[k];
                h[(j, i)] += spec.v_n[k].conj();
            }
        }
    }
    Ok(h)
}

/// Ensemble decays (including `sqrt(gamma_p)|g><p|`) and cavity loss for the gate model.
pub fn gate_collapse_operators(spec: &GateSystemSpec, p: &PhysicalParams) -> Vec<DMatrix<C64>> {
    let basis = spec.basis();
    let mut ops = Vec::new();
    for k in 0..spec.ensemble.n_atoms {
        for (from, rate) in [(E, p.gamma_e), (R, p.gamma_r), (P, p.gamma_p)] {
            if rate > 0.0 {
                ops.push(basis.transition(k, from, G) * C64::new(rate.sqrt(), 0.0));
            }
        }
    }
    if p.kappa > 0.0 {
        ops.push(basis.annihilation() * C64::new(p.kappa.sqrt(), 0.0));
    }
    ops
}

/// Largest entry-wise row sum, an upper bound on the spectral radius.
fn norm_bound(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn check_dt(dt: f64, m: &DMatrix<C64>) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let w = norm_bound(m);
    let max_dt = if w == 0.0 { f64::INFINITY } else { TAU / (50.0 * w) };
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepSizeTooLarge { dt, max_dt });
    }
    Ok(())
}

/// How [`evolve_dense`] propagates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Eigendecomposition of the Hermitian Hamiltonian.
    Exact,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<C64>>,
}

/// Schrödinger evolution sampled at every multiple of `dt` up to `t_end`.
pub fn evolve_dense(
    h: &DMatrix<C64>,
    psi0: &DVector<C64>,
    t_end: f64,
    dt: f64,
    method: Propagation,
) -> Result<DenseTrajectory> {
    if h.nrows() != psi0.len() || !h.is_square() {
        return Err(Error::InvalidInput("Hamiltonian and state dimensions differ".into()));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let states = match method {
        Propagation::Exact => {
            let eig = h.clone().symmetric_eigen();
            let v = &eig.eigenvectors;
            let c = v.adjoint() * psi0;
            times
                .iter()
                .map(|&t| {
                    let phased = DVector::from_iterator(
                        c.len(),
                        c.iter().zip(eig.eigenvalues.iter()).map(|(ci, l)| ci * C64::from_polar(1.0, -l * t)),
                    );
                    v * phased
                })
                .collect()
        }
        Propagation::Rk4 => {
            check_dt(dt, h)?;
            let mi = h * C64::new(0.0, -1.0);
            let mut psi = psi0.clone();
            let mut out = Vec::with_capacity(times.len());
            out.push(psi.clone());
            let h2 = C64::new(0.5 * dt, 0.0);
            let h6 = C64::new(dt / 6.0, 0.0);
            for _ in 0..steps {
                let k1 = &mi * &psi;
                let k2 = &mi * (&psi + &k1 * h2);
                let k3 = &mi * (&psi + &k2 * h2);
                let k4 = &mi * (&psi + &k3 * C64::new(dt, 0.0));
                psi += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * h6;
                out.push(psi.clone());
            }
            out
        }
    };
    Ok(DenseTrajectory { times, states })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladTrajectory {
    pub times: Vec<f64>,
    pub rhos: Vec<DMatrix<C64>>,
    /// Smallest eigenvalue of rho seen at the sample times.
    pub min_eigenvalue: f64,
}

/// RK4 integration of the Lindblad master equation, sampled every `stride` steps.
/// Fails with `TraceError` when the trace drifts by more than [`TRACE_TOL`].
pub fn lindblad_evolve(
    h: &DMatrix<C64>,
    collapse: &[DMatrix<C64>],
    rho0: &DMatrix<C64>,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<LindbladTrajectory> {
    let d = h.nrows();
    if rho0.nrows() != d || rho0.ncols() != d || collapse.iter().any(|l| l.nrows() != d || l.ncols() != d) {
        return Err(Error::InvalidInput("operator dimensions differ".into()));
    }
    if !(t_end >= 0.0) {
        return Err(Error::InvalidInput(format!("t_end must be >= 0, got {t_end}")));
    }
    let mut heff = h.clone();
    for l in collapse {
        heff -= l.adjoint() * l * C64::new(0.0, 0.5);
    }
    check_dt(dt, &heff)?;
    let heff_dag = heff.adjoint();
    let l_dag: Vec<_> = collapse.iter().map(|l| l.adjoint()).collect();
    let rhs = |rho: &DMatrix<C64>| -> DMatrix<C64> {
        let mut out = (&heff * rho - rho * &heff_dag) * C64::new(0.0, -1.0);
        for (l, ld) in collapse.iter().zip(&l_dag) {
            out += l * rho * ld;
        }
        out
    };
    let stride = stride.max(1);
    let steps = (t_end / dt).round() as usize;
    let trace0 = rho0.trace();
    let mut rho = rho0.clone();
    let mut times = vec![0.0];
    let mut rhos = vec![rho.clone()];
    let mut min_eigenvalue = min_eig(&rho);
    let (h2, h6) = (C64::new(0.5 * dt, 0.0), C64::new(dt / 6.0, 0.0));
    for step in 1..=steps {
        let k1 = rhs(&rho);
        let k2 = rhs(&(&rho + &k1 * h2));
        let k3 = rhs(&(&rho + &k2 * h2));
        let k4 = rhs(&(&rho + &k3 * C64::new(dt, 0.0)));
        rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * h6;
        let t = step as f64 * dt;
        let drift = (rho.trace() - trace0).norm();
        if drift > TRACE_TOL {
            return Err(Error::TraceError { drift, t });
        }
        if step % stride == 0 {
            min_eigenvalue = min_eigenvalue.min(min_eig(&rho));
            times.push(t);
            rhos.push(rho.clone());
        }
    }
    Ok(LindbladTrajectory { times, rhos, min_eigenvalue })
}

fn min_eig(rho: &DMatrix<C64>) -> f64 {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `Tr(rho A)`.
pub fn expectation(rho: &DMatrix<C64>, a: &DMatrix<C64>) -> C64 {
    (rho * a).trace()
}

/// Pure-state density matrix.
pub fn projector(psi: &DVector<C64>) -> DMatrix<C64> {
    psi * psi.adjoint()
}

/// Stationary state of the Lindblad equation by direct linear solve (`dim <= 40`).
pub fn lindblad_steady_state(h: &DMatrix<C64>, collapse: &[DMatrix<C64>]) -> Result<DMatrix<C64>> {
    let d = h.nrows();
    if d > 40 {
        return Err(Error::DimensionExceeded { dim: d, cap: 40 });
    }
    let id = DMatrix::<C64>::identity(d, d);
    // Column-stacking: vec(A X B) = (B^T kron A) vec(X).
    let mut sup = (id.kronecker(h) - h.transpose().kronecker(&id)) * C64::new(0.0, -1.0);
    for l in collapse {
        let ldl = l.adjoint() * l;
        sup += l.conjugate().kronecker(l);
        sup -= (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * C64::new(0.5, 0.0);
    }
    let mut rhs = DVector::zeros(d * d);
    for c in 0..d * d {
        sup[(0, c)] = ZERO;
    }
    for i in 0..d {
        sup[(0, i * d + i)] = C64::new(1.0, 0.0);
    }
    rhs[0] = C64::new(1.0, 0.0);
    let x = sup.lu().solve(&rhs).ok_or(Error::SingularResponse { delta: 0.0 })?;
    Ok(DMatrix::from_column_slice(d, d, x.as_slice()))
}

/// Reflection coefficient of a weak coherent probe at offset `delta` from the cavity.
///
/// `ground` is the undriven ground state index and `loaded` the state reached
/// by adding one photon to it. The single-excitation amplitudes obey
/// `(H_eff - delta) x = i sqrt(kappa) |loaded>`, solved on the part of the
/// space connected to `loaded`; then `R = 1 + sqrt(kappa) x_loaded`.
pub fn weak_probe_reflection(
    h: &DMatrix<C64>,
    collapse: &[DMatrix<C64>],
    loaded: usize,
    kappa: f64,
    delta: f64,
) -> Result<C64> {
    let d = h.nrows();
    let mut heff = h.clone();
    for l in collapse {
        heff -= l.adjoint() * l * C64::new(0.0, 0.5);
    }
    // Connected component of the driven state.
    let mut seen = vec![false; d];
    let mut stack = vec![loaded];
    seen[loaded] = true;
    while let Some(j) = stack.pop() {
        for i in 0..d {
            if !seen[i] && (heff[(i, j)] != ZERO || heff[(j, i)] != ZERO) {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    let idx: Vec<usize> = (0..d).filter(|&i| seen[i]).collect();
    let m = idx.len();
    let mut a = DMatrix::from_fn(m, m, |r, c| heff[(idx[r], idx[c])]);
    for k in 0..m {
        a[(k, k)] -= delta;
    }
    let pos = idx.iter().position(|&i| i == loaded).expect("driven state in its own component");
    let mut rhs = DVector::zeros(m);
    rhs[pos] = I * kappa.sqrt();
    let x = a.lu().solve(&rhs).ok_or(Error::SingularResponse { delta })?;
    Ok(1.0 + kappa.sqrt() * x[pos])
}

/// Weak-probe reflection of the gate model with the qubit held in `|r'>`.
pub fn dense_gate_reflection(spec: &GateSystemSpec, p: &PhysicalParams, delta: f64) -> Result<C64> {
    let h = build_gate_hamiltonian(spec, p)?;
    let ops = gate_collapse_operators(spec, p);
    let basis = spec.basis();
    let mut digits = vec![G; spec.ensemble.n_atoms];
    digits.push(QUBIT_R);
    if basis.cutoff < 1 {
        return Err(Error::InvalidInput("gate reflection needs cutoff >= 1".into()));
    }
    weak_probe_reflection(&h, &ops, basis.index(&digits, 1), p.kappa, delta)
}

/// Reflection from the driven steady state at finite probe strength.
///
/// `drive` is the rate `sqrt(kappa) beta` at which the probe feeds the cavity;
/// it enters as `-i drive (b^dag - b)` in the frame rotating at the probe
/// frequency, and `R = 1 + kappa <b> / drive`.
pub fn driven_reflection(spec: &FullSystemSpec, p: &PhysicalParams, delta: f64, drive: f64) -> Result<C64> {
    let basis = spec.basis();
    let mut h = build_hamiltonian(spec, p)?;
    let nex = basis.excitation_number(&[]);
    for (j, n) in nex.iter().enumerate() {
        h[(j, j)] -= delta * *n as f64;
    }
    let a = basis.annihilation();
    h += (a.adjoint() - &a) * C64::new(0.0, -drive);
    let rho = lindblad_steady_state(&h, &collapse_operators(spec, p))?;
    Ok(1.0 + p.kappa * expectation(&rho, &a) / drive)
}

/// Dense state of one atom plus cavity matching a ladder state of the same cutoff.
pub fn ladder_to_dense(s: &FockLadderState) -> DVector<C64> {
    let c = s.cutoff();
    let basis = Basis { levels: vec![3], cutoff: c };
    let mut v = DVector::zeros(basis.dim());
    for n in 0..=c {
        v[basis.index(&[G], n)] = s.c_b[n];
        v[basis.index(&[E], n)] = s.c_e[n];
        v[basis.index(&[R], n)] = s.c_r[n];
    }
    v
}

/// Populations of: all atoms ground, exactly one atom in `e`, exactly one atom in `r`
/// (others ground), summed over photon number.
pub fn collective_populations(basis: &Basis, psi: &DVector<C64>) -> [f64; 3] {
    let mut out = [0.0; 3];
    for j in 0..basis.dim() {
        let (digits, _) = basis.decode(j);
        let excited: Vec<usize> = digits.iter().copied().filter(|d| *d != G).collect();
        let pop = psi[j].norm_sqr();
        match excited.as_slice() {
            [] => out[0] += pop,
            [E] => out[1] += pop,
            [R] => out[2] += pop,
            _ => {}
        }
    }
    out
}

/// Population of states with at least two atoms in `r`.
pub fn double_rydberg_population(basis: &Basis, psi: &DVector<C64>) -> f64 {
    (0..basis.dim())
        .filter(|&j| basis.decode(j).0.iter().filter(|d| **d == R).count() >= 2)
        .map(|j| psi[j].norm_sqr())
        .sum()
}

/// Mean photon number and total Rydberg (`r`) population of rho.
pub fn photon_and_rydberg(basis: &Basis, rho: &DMatrix<C64>) -> (f64, f64) {
    let mut n_mean = 0.0;
    let mut ryd = 0.0;
    for j in 0..basis.dim() {
        let (digits, n) = basis.decode(j);
        let p = rho[(j, j)].re;
        n_mean += n as f64 * p;
        ryd += digits.iter().filter(|d| **d == R).count() as f64 * p;
    }
    (n_mean, ryd)
}

/// Largest `|H - H^dag|` entry.
pub fn hermiticity_defect(h: &DMatrix<C64>) -> f64 {
    (h - h.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::eom_full;
    use crate::params::{mhz, SingleExcState};

    fn params() -> PhysicalParams {
        PhysicalParams {
            omega_rabi: C64::new(mhz(3.0), mhz(-1.0)),
            delta_e: mhz(7.0),
            delta_r: mhz(0.4),
            gamma_e: mhz(1.0),
            gamma_r: mhz(0.2),
            kappa: mhz(0.5),
            ..Default::default()
        }
        .with_collective_coupling(mhz(2.0))
    }

    #[test]
    fn basis_round_trip() {
        let b = Basis { levels: vec![3, 4, 2], cutoff: 2 };
        assert_eq!(b.dim(), 72);
        for j in 0..b.dim() {
            let (d, n) = b.decode(j);
            assert_eq!(b.index(&d, n), j);
        }
    }

    #[test]
    fn single_atom_block_matches_reduced_equations() {
        let p = params();
        let spec = FullSystemSpec::uniform(1, p.g_collective, 0.0, 1).unwrap();
        let h = build_hamiltonian(&spec, &p).unwrap();
        assert_eq!(h.nrows(), 6);
        let b = spec.basis();
        let idx = [b.index(&[G], 1), b.index(&[E], 0), b.index(&[R], 0)];
        let lossless = PhysicalParams { gamma_e: 0.0, gamma_r: 0.0, kappa: 0.0, ..p.clone() };
        for (col, unit) in [(0, [1.0, 0.0, 0.0]), (1, [0.0, 1.0, 0.0]), (2, [0.0, 0.0, 1.0])] {
            let s = SingleExcState::from_array(unit.map(|x| C64::new(x, 0.0)));
            let d = eom_full(&s, &lossless).to_array();
            for row in 0..3 {
                let from_h = -I * h[(idx[row], idx[col])];
                assert!((from_h - d[row]).norm() < 1e-12, "({row},{col})");
            }
        }
    }

    #[test]
    fn hermitian_construction() {
        let p = params();
        let inter = DMatrix::from_row_slice(3, 3, &[0.0, 5.0, 1.0, 5.0, 0.0, 2.0, 1.0, 2.0, 0.0]);
        let spec = FullSystemSpec::new(vec![C64::new(1.0, 0.5), C64::new(-0.3, 2.0), C64::new(0.7, 0.0)], inter, 3)
            .unwrap();
        assert!(hermiticity_defect(&build_hamiltonian(&spec, &p).unwrap()) < 1e-14);
        let gate = GateSystemSpec::new(
            FullSystemSpec::uniform(2, 1.3, 4.0, 1).unwrap(),
            vec![C64::new(3.0, 1.0), C64::new(0.5, -2.0)],
        )
        .unwrap();
        let pg = PhysicalParams { delta_p: 0.7, ..p };
        assert!(hermiticity_defect(&build_gate_hamiltonian(&gate, &pg).unwrap()) < 1e-14);
    }

    #[test]
    fn caps() {
        assert!(matches!(FullSystemSpec::uniform(5, 1.0, 0.0, 1), Err(Error::DimensionExceeded { .. })));
        assert!(matches!(FullSystemSpec::uniform(1, 1.0, 0.0, 9), Err(Error::DimensionExceeded { .. })));
        assert!(FullSystemSpec::uniform(4, 1.0, 0.0, 8).is_ok());
        let big = FullSystemSpec::uniform(4, 1.0, 0.0, 1).unwrap();
        assert!(matches!(GateSystemSpec::new(big, vec![ZERO; 4]), Err(Error::DimensionExceeded { .. })));
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(FullSystemSpec::new(vec![ZERO; 2], bad, 1).is_err());
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let h = DMatrix::<C64>::zeros(4, 4);
        let psi = DVector::from_vec(vec![C64::new(0.5, 0.5), ZERO, C64::new(0.5, 0.0), C64::new(0.0, 0.5)]);
        for m in [Propagation::Exact, Propagation::Rk4] {
            let tr = evolve_dense(&h, &psi, 1.0, 0.1, m).unwrap();
            assert!(tr.states.iter().all(|s| *s == psi));
        }
    }

    #[test]
    fn exact_and_rk4_agree() {
        let p = PhysicalParams { gamma_e: 0.0, gamma_r: 0.0, kappa: 0.0, ..params() };
        let spec = FullSystemSpec::uniform(2, mhz(1.0), mhz(3.0), 2).unwrap();
        let h = build_hamiltonian(&spec, &p).unwrap();
        let mut psi = DVector::zeros(spec.dim());
        psi[spec.basis().index(&[G, G], 2)] = C64::new(1.0, 0.0);
        let a = evolve_dense(&h, &psi, 1.0, 2e-4, Propagation::Exact).unwrap();
        let b = evolve_dense(&h, &psi, 1.0, 2e-4, Propagation::Rk4).unwrap();
        let last = a.states.len() - 1;
        let err = (&a.states[last] - &b.states[last]).norm();
        assert!(err < 1e-8, "{err}");
        assert!((b.states[last].norm() - 1.0).abs() < 1e-8);
        assert!(matches!(evolve_dense(&h, &psi, 1.0, 0.5, Propagation::Rk4), Err(Error::StepSizeTooLarge { .. })));
    }

    #[test]
    fn cavity_decay_from_two_photons() {
        let p = PhysicalParams { kappa: mhz(0.5), ..Default::default() };
        let spec = FullSystemSpec::uniform(1, 0.0, 0.0, 3).unwrap();
        let b = spec.basis();
        let h = build_hamiltonian(&spec, &p).unwrap();
        let mut psi = DVector::zeros(b.dim());
        psi[b.index(&[G], 2)] = C64::new(1.0, 0.0);
        let tr = lindblad_evolve(&h, &collapse_operators(&spec, &p), &projector(&psi), 2.0, 1e-3, 100).unwrap();
        for (t, rho) in tr.times.iter().zip(&tr.rhos) {
            let (n, _) = photon_and_rydberg(&b, rho);
            assert!((n - 2.0 * (-p.kappa * t).exp()).abs() < 1e-6, "t = {t}");
        }
        assert!(tr.min_eigenvalue > POSITIVITY_FLOOR);
    }

    #[test]
    fn no_collapse_is_unitary() {
        let p = PhysicalParams { gamma_e: 0.0, gamma_r: 0.0, kappa: 0.0, ..params() };
        let spec = FullSystemSpec::uniform(1, p.g_collective, 0.0, 2).unwrap();
        let h = build_hamiltonian(&spec, &p).unwrap();
        let mut psi = DVector::zeros(spec.dim());
        psi[spec.basis().index(&[G], 1)] = C64::new(1.0, 0.0);
        let lt = lindblad_evolve(&h, &[], &projector(&psi), 0.5, 1e-3, 500).unwrap();
        let st = evolve_dense(&h, &psi, 0.5, 0.5, Propagation::Exact).unwrap();
        let err = (&lt.rhos[1] - projector(&st.states[1])).norm();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn forster_doublet() {
        let v = mhz(40.0);
        let ens = FullSystemSpec::uniform(1, 0.0, 0.0, 0).unwrap();
        let spec = GateSystemSpec::new(ens, vec![C64::new(v, 0.0)]).unwrap();
        let p = PhysicalParams::default();
        let h = build_gate_hamiltonian(&spec, &p).unwrap();
        let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + v).abs() < 1e-9 && (ev[ev.len() - 1] - v).abs() < 1e-9);
    }

    #[test]
    fn no_forster_no_p_coupling() {
        let spec = GateSystemSpec::new(FullSystemSpec::uniform(2, 1.0, 0.0, 1).unwrap(), vec![ZERO; 2]).unwrap();
        let h = build_gate_hamiltonian(&spec, &params()).unwrap();
        let b = spec.basis();
        let in_p = |j: usize| b.decode(j).0.iter().take(2).any(|d| *d == P) || b.decode(j).0[2] == QUBIT_P;
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                if in_p(i) != in_p(j) {
                    assert_eq!(h[(i, j)], ZERO);
                }
            }
        }
    }

    #[test]
    fn bare_cavity_reflection() {
        let p = PhysicalParams { kappa: mhz(1.0), delta_e: mhz(10.0), ..Default::default() };
        let spec = FullSystemSpec::uniform(1, 0.0, 0.0, 1).unwrap();
        let h = build_hamiltonian(&spec, &p).unwrap();
        let r = weak_probe_reflection(&h, &collapse_operators(&spec, &p), spec.basis().index(&[G], 1), p.kappa, 0.0)
            .unwrap();
        assert!((r + 1.0).norm() < 1e-12);
        let spec2 = FullSystemSpec::uniform(1, 0.0, 0.0, 2).unwrap();
        let rd = driven_reflection(&spec2, &p, 0.0, 1e-3 * p.kappa).unwrap();
        assert!((rd + 1.0).norm() < 1e-6, "{rd}");
    }

    #[test]
    fn steady_state_is_normalized() {
        let p = params();
        let spec = FullSystemSpec::uniform(1, p.g_collective, 0.0, 2).unwrap();
        let mut h = build_hamiltonian(&spec, &p).unwrap();
        let a = spec.basis().annihilation();
        h += (a.adjoint() + &a) * C64::new(0.3, 0.0);
        let rho = lindblad_steady_state(&h, &collapse_operators(&spec, &p)).unwrap();
        assert!((rho.trace() - 1.0).norm() < 1e-10);
        assert!(hermiticity_defect(&rho) < 1e-10);
    }

    #[test]
    fn ladder_mapping() {
        let s = FockLadderState::fock(2, 3).unwrap();
        let v = ladder_to_dense(&s);
        let b = Basis { levels: vec![3], cutoff: 3 };
        assert_eq!(v[b.index(&[G], 2)], C64::new(1.0, 0.0));
        assert!((v.norm() - 1.0).abs() < 1e-15);
    }
}

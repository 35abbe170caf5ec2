//! Monte-Carlo wave-function (quantum jump) simulation on the photon-number
//! ladder under strong blockade.
//!
//! Each step applies the Hamiltonian RK4 update, draws one uniform number to
//! choose between no jump and one of the three jump channels, applies either
//! the jump or the first-order no-jump damping, then renormalizes.
//!
//! Jump conventions:
//! * `GammaE` / `GammaR`: the atom returns to ground and the photonic wave
//!   function carried by the decaying branch becomes the new ground-branch
//!   ladder; everything else is discarded.
//! * `Kappa`: the photon annihilation operator acts on all three branches,
//!   `c'_n = sqrt(n + 1) c_{n+1}`.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::csv::CsvWriter;
use crate::error::{Error, Result};
use crate::params::{FockLadderState, PhysicalParams};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Default bound on the coherent-state mass lost to truncation.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-6;

/// Total jump probability per step above which a step is rejected.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

/// Trajectories per reduction block. Fixed so results do not depend on the worker count.
const CHUNK: usize = 16;

/// Coherent-state mass beyond `cutoff`, summed directly over the Poisson tail.
pub fn coherent_tail_mass(alpha: C64, cutoff: usize) -> f64 {
    let mean = alpha.norm_sqr();
    if mean == 0.0 {
        return 0.0;
    }
    // log P(n) = -mean + n ln(mean) - ln n!
    let mut log_p = -mean;
    for n in 1..=cutoff + 1 {
        log_p += mean.ln() - (n as f64).ln();
    }
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    loop {
        let term = log_p.exp();
        tail += term;
        if (n as f64) > mean && term < tail * 1e-17 {
            break;
        }
        n += 1;
        log_p += mean.ln() - (n as f64).ln();
        if n > cutoff + 100_000 {
            break;
        }
    }
    tail
}

/// Atoms in ground, cavity in the coherent state `|alpha>` truncated at `cutoff`
/// and renormalized. Fails when the truncated tail mass exceeds the default threshold.
pub fn coherent_ladder(alpha: C64, cutoff: usize) -> Result<FockLadderState> {
    coherent_ladder_with_threshold(alpha, cutoff, DEFAULT_TAIL_THRESHOLD)
}

pub fn coherent_ladder_with_threshold(alpha: C64, cutoff: usize, threshold: f64) -> Result<FockLadderState> {
    if cutoff == 0 {
        return Err(Error::InvalidInput("cutoff must be >= 1".into()));
    }
    let tail = coherent_tail_mass(alpha, cutoff);
    if tail > threshold {
        return Err(Error::CutoffTooSmall { cutoff, tail, threshold });
    }
    let mut s = FockLadderState::zeros(cutoff);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    s.c_b[0] = c;
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        s.c_b[n] = c;
    }
    s.renormalize();
    Ok(s)
}

/// Hamiltonian part of the ladder equations of motion.
///
/// For every `n >= 1` the triple `(c_b[n], c_e[n-1], c_r[n-1])` forms a closed
/// loop; `c_b[0]` is stationary; `(c_e[cutoff], c_r[cutoff])` lose their partner
/// above the cutoff.
pub fn eom_fock(s: &FockLadderState, p: &PhysicalParams) -> FockLadderState {
    let cut = s.cutoff();
    let g = p.g_collective;
    let om = p.omega_rabi;
    let mut d = FockLadderState::zeros(cut);
    for m in 0..=cut {
        // m photons alongside the atomic excitation
        let up = if m < cut { ((m + 1) as f64).sqrt() * g * s.c_b[m + 1] } else { ZERO };
        d.c_e[m] = -up + I * om.conj() * 0.5 * s.c_r[m] + I * p.delta_e * s.c_e[m];
        d.c_r[m] = I * om * 0.5 * s.c_e[m] + I * p.delta_r * s.c_r[m];
    }
    for n in 1..=cut {
        d.c_b[n] = (n as f64).sqrt() * g * s.c_e[n - 1];
    }
    d
}

/// Kind of quantum jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JumpKind {
    GammaE,
    GammaR,
    Kappa,
}

impl JumpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JumpKind::GammaE => "gamma_e",
            JumpKind::GammaR => "gamma_r",
            JumpKind::Kappa => "kappa",
        }
    }
}

/// A detected jump and the end time of the step in which it happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: JumpKind,
}

/// Per-step detection probabilities of the three channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpProbabilities {
    pub gamma_e: f64,
    pub gamma_r: f64,
    pub kappa: f64,
}

impl JumpProbabilities {
    pub fn total(&self) -> f64 {
        self.gamma_e + self.gamma_r + self.kappa
    }
}

struct LadderSums {
    norm: f64,
    e: f64,
    r: f64,
    photons: f64,
}

fn ladder_sums(s: &FockLadderState) -> LadderSums {
    let mut out = LadderSums { norm: 0.0, e: 0.0, r: 0.0, photons: 0.0 };
    for n in 0..s.c_b.len() {
        let (b, e, r) = (s.c_b[n].norm_sqr(), s.c_e[n].norm_sqr(), s.c_r[n].norm_sqr());
        out.norm += b + e + r;
        out.e += e;
        out.r += r;
        out.photons += n as f64 * (b + e + r);
    }
    out
}

fn probabilities_from(sums: &LadderSums, p: &PhysicalParams, dt: f64) -> Result<JumpProbabilities> {
    let inv = 1.0 / sums.norm;
    let probs = JumpProbabilities {
        gamma_e: p.gamma_e * dt * sums.e * inv,
        gamma_r: p.gamma_r * dt * sums.r * inv,
        kappa: p.kappa * dt * sums.photons * inv,
    };
    let total = probs.total();
    if total >= MAX_JUMP_PROBABILITY {
        return Err(Error::StepTooLarge { total, dt, suggested: dt * 0.5 * MAX_JUMP_PROBABILITY / total });
    }
    Ok(probs)
}

/// Jump probabilities for one step of length `dt` from a normalized state.
pub fn jump_probabilities(s: &FockLadderState, p: &PhysicalParams, dt: f64) -> Result<JumpProbabilities> {
    let sums = ladder_sums(s);
    if sums.norm == 0.0 {
        return Ok(JumpProbabilities { gamma_e: 0.0, gamma_r: 0.0, kappa: 0.0 });
    }
    probabilities_from(&sums, p, dt)
}

/// Applies a jump and renormalizes.
pub fn apply_jump(s: &FockLadderState, kind: JumpKind) -> Result<FockLadderState> {
    let cut = s.cutoff();
    let mut out = FockLadderState::zeros(cut);
    match kind {
        JumpKind::GammaE => out.c_b.copy_from_slice(&s.c_e),
        JumpKind::GammaR => out.c_b.copy_from_slice(&s.c_r),
        JumpKind::Kappa => {
            for n in 0..cut {
                let f = ((n + 1) as f64).sqrt();
                out.c_b[n] = f * s.c_b[n + 1];
                out.c_e[n] = f * s.c_e[n + 1];
                out.c_r[n] = f * s.c_r[n + 1];
            }
        }
    }
    if out.renormalize() == 0.0 {
        return Err(Error::ImpossibleJump);
    }
    Ok(out)
}

/// Largest permitted step on a ladder truncated at `cutoff`: fifty steps per
/// cycle of the fastest of `|delta_e|`, `|delta_r|`, `|Omega|`, `G sqrt(cutoff)`, `kappa`.
pub fn max_step(p: &PhysicalParams, cutoff: usize) -> f64 {
    let w = p
        .delta_e
        .abs()
        .max(p.delta_r.abs())
        .max(p.omega_rabi.norm())
        .max(p.g_collective * (cutoff as f64).sqrt())
        .max(p.kappa);
    if w == 0.0 {
        f64::INFINITY
    } else {
        TAU / (50.0 * w)
    }
}

type Block = [[C64; 3]; 3];

/// One RK4 step of the ladder Hamiltonian, precomputed per excitation manifold.
///
/// For a linear autonomous system one RK4 step equals multiplication by the
/// fourth-order Taylor polynomial of `exp(dt M)`, which is block diagonal here.
struct LadderPropagator {
    blocks: Vec<Block>,
}

impl LadderPropagator {
    fn new(p: &PhysicalParams, cutoff: usize, dt: f64) -> Self {
        let g = p.g_collective;
        let om = p.omega_rabi;
        let blocks = (0..=cutoff + 1)
            .map(|k| {
                // basis (b_k, e_{k-1}, r_{k-1})
                let mut m: Block = [[ZERO; 3]; 3];
                if k >= 1 {
                    m[1][1] = I * p.delta_e;
                    m[1][2] = I * om.conj() * 0.5;
                    m[2][1] = I * om * 0.5;
                    m[2][2] = I * p.delta_r;
                }
                if (1..=cutoff).contains(&k) {
                    let s = (k as f64).sqrt() * g;
                    m[0][1] = C64::new(s, 0.0);
                    m[1][0] = C64::new(-s, 0.0);
                }
                for row in m.iter_mut() {
                    for x in row.iter_mut() {
                        *x *= dt;
                    }
                }
                taylor4(&m)
            })
            .collect();
        LadderPropagator { blocks }
    }

    fn apply(&self, s: &mut FockLadderState) {
        let cut = s.cutoff();
        for k in 1..=cut {
            let b = &self.blocks[k];
            let v = [s.c_b[k], s.c_e[k - 1], s.c_r[k - 1]];
            s.c_b[k] = b[0][0] * v[0] + b[0][1] * v[1] + b[0][2] * v[2];
            s.c_e[k - 1] = b[1][0] * v[0] + b[1][1] * v[1] + b[1][2] * v[2];
            s.c_r[k - 1] = b[2][0] * v[0] + b[2][1] * v[1] + b[2][2] * v[2];
        }
        let b = &self.blocks[cut + 1];
        let (e, r) = (s.c_e[cut], s.c_r[cut]);
        s.c_e[cut] = b[1][1] * e + b[1][2] * r;
        s.c_r[cut] = b[2][1] * e + b[2][2] * r;
    }
}

fn mat_mul(a: &Block, b: &Block) -> Block {
    let mut c: Block = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

fn taylor4(a: &Block) -> Block {
    // Horner: I + A(I + A/2(I + A/3(I + A/4)))
    let mut acc: Block = [[ZERO; 3]; 3];
    for (i, row) in acc.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    for k in (1..=4).rev() {
        let mut t = mat_mul(a, &acc);
        for (i, row) in t.iter_mut().enumerate() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
            row[i] += 1.0;
        }
        acc = t;
    }
    acc
}

/// Time grid of an MCWF run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McwfOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Record observables every `stride` steps.
    pub stride: usize,
}

impl McwfOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        McwfOptions { t_end, dt, stride: 1 }
    }

    /// Records every `interval` us (rounded to whole steps).
    pub fn with_sample_interval(mut self, interval: f64) -> Self {
        self.stride = ((interval / self.dt).round() as usize).max(1);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.n_steps()).step_by(self.stride).map(|i| i as f64 * self.dt).collect()
    }

    fn check(&self, p: &PhysicalParams, cutoff: usize) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "need dt > 0 and t_end >= 0, got dt = {}, t_end = {}",
                self.dt, self.t_end
            )));
        }
        let max_dt = max_step(p, cutoff);
        if self.dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::StepSizeTooLarge { dt: self.dt, max_dt });
        }
        Ok(())
    }
}

/// Observables along one stochastic trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct McwfTrajectory {
    pub times: Vec<f64>,
    pub mean_photon: Vec<f64>,
    pub rydberg_pop: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub final_state: FockLadderState,
}

/// Runs a single trajectory. Deterministic for a fixed `seed`.
pub fn run_trajectory(
    state0: &FockLadderState,
    p: &PhysicalParams,
    opts: McwfOptions,
    seed: u64,
) -> Result<McwfTrajectory> {
    let cutoff = state0.cutoff();
    opts.check(p, cutoff)?;
    let prop = LadderPropagator::new(p, cutoff, opts.dt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sink = TraceSink::default();
    let final_state = evolve(state0, p, opts, &prop, &mut rng, &mut sink)?;
    Ok(McwfTrajectory {
        times: opts.sample_times(),
        mean_photon: sink.mean_photon,
        rydberg_pop: sink.rydberg_pop,
        jumps: sink.jumps,
        final_state,
    })
}

trait Sink {
    fn sample(&mut self, index: usize, s: &FockLadderState);
    fn jump(&mut self, _ev: JumpEvent) {}
}

#[derive(Default)]
struct TraceSink {
    mean_photon: Vec<f64>,
    rydberg_pop: Vec<f64>,
    jumps: Vec<JumpEvent>,
}

impl Sink for TraceSink {
    fn sample(&mut self, _index: usize, s: &FockLadderState) {
        self.mean_photon.push(s.mean_photon());
        self.rydberg_pop.push(s.rydberg_population());
    }

    fn jump(&mut self, ev: JumpEvent) {
        self.jumps.push(ev);
    }
}

fn evolve<S: Sink>(
    state0: &FockLadderState,
    p: &PhysicalParams,
    opts: McwfOptions,
    prop: &LadderPropagator,
    rng: &mut ChaCha8Rng,
    sink: &mut S,
) -> Result<FockLadderState> {
    let mut s = state0.clone();
    if s.renormalize() == 0.0 {
        return Err(Error::InvalidInput("initial state has zero norm".into()));
    }
    let cut = s.cutoff();
    let n_steps = opts.n_steps();
    let dt = opts.dt;
    let damp_e = 1.0 - 0.5 * p.gamma_e * dt;
    let damp_r = 1.0 - 0.5 * p.gamma_r * dt;
    let damp_k: Vec<f64> = (0..=cut).map(|n| 1.0 - 0.5 * p.kappa * n as f64 * dt).collect();
    sink.sample(0, &s);
    for step in 1..=n_steps {
        prop.apply(&mut s);
        let sums = ladder_sums(&s);
        let probs = probabilities_from(&sums, p, dt)?;
        let u: f64 = rng.gen();
        let kind = if u < probs.gamma_e {
            Some(JumpKind::GammaE)
        } else if u < probs.gamma_e + probs.gamma_r {
            Some(JumpKind::GammaR)
        } else if u < probs.total() {
            Some(JumpKind::Kappa)
        } else {
            None
        };
        match kind {
            Some(kind) => {
                s = apply_jump(&s, kind)?;
                sink.jump(JumpEvent { time: step as f64 * dt, kind });
            }
            None => {
                for n in 0..=cut {
                    let k = damp_k[n];
                    s.c_b[n] *= k;
                    s.c_e[n] *= k * damp_e;
                    s.c_r[n] *= k * damp_r;
                }
                s.renormalize();
            }
        }
        debug_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        if step % opts.stride == 0 {
            sink.sample(step / opts.stride, &s);
        }
    }
    Ok(s)
}

/// Seed of trajectory `index` derived from `master_seed` (splitmix64 expansion).
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Running mean and second central moment per sample time.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments { count: 0.0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    /// Chan et al. pairwise merge of two moment sets.
    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = other.clone();
            return;
        }
        let n = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / n;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / n;
        }
        self.count = n;
    }

    fn stderr(&self) -> Vec<f64> {
        if self.count < 2.0 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.count;
        self.m2.iter().map(|m2| (m2 / (n - 1.0) / n).sqrt()).collect()
    }
}

/// Sink that folds samples into per-time Welford accumulators.
struct MomentSink<'a> {
    photon: &'a mut Moments,
    rydberg: &'a mut Moments,
    jumps: &'a mut [u64; 3],
}

impl Sink for MomentSink<'_> {
    fn sample(&mut self, index: usize, s: &FockLadderState) {
        let n = self.photon.count;
        for (acc, x) in [(&mut *self.photon, s.mean_photon()), (&mut *self.rydberg, s.rydberg_population())] {
            let d = x - acc.mean[index];
            acc.mean[index] += d / n;
            acc.m2[index] += d * (x - acc.mean[index]);
        }
    }

    fn jump(&mut self, ev: JumpEvent) {
        let i = match ev.kind {
            JumpKind::GammaE => 0,
            JumpKind::GammaR => 1,
            JumpKind::Kappa => 2,
        };
        self.jumps[i] += 1;
    }
}

/// Ensemble-averaged observables with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_photon: Vec<f64>,
    pub stderr_photon: Vec<f64>,
    pub rydberg_pop: Vec<f64>,
    pub stderr_rydberg: Vec<f64>,
    pub n_traj: usize,
    pub master_seed: u64,
    /// Total jumps per channel: gamma_e, gamma_r, kappa.
    pub jump_counts: [u64; 3],
}

impl EnsembleResult {
    pub const CSV_HEADER: [&'static str; 5] =
        ["t_us", "mean_photon", "stderr_photon", "rydberg_pop", "stderr_rydberg"];

    pub fn to_csv(&self) -> String {
        let mut w = CsvWriter::new(&Self::CSV_HEADER);
        for i in 0..self.times.len() {
            w.row_f64(&[
                self.times[i],
                self.mean_photon[i],
                self.stderr_photon[i],
                self.rydberg_pop[i],
                self.stderr_rydberg[i],
            ]);
        }
        w.finish()
    }
}

/// Averages `n_traj` trajectories. Trajectory `i` uses
/// [`trajectory_seed`]`(master_seed, i)`; the result is bit-identical for any
/// `workers` value (`None` uses the global rayon pool).
pub fn ensemble_average(
    state0: &FockLadderState,
    p: &PhysicalParams,
    opts: McwfOptions,
    n_traj: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::InvalidInput("n_traj must be >= 1".into()));
    }
    let cutoff = state0.cutoff();
    opts.check(p, cutoff)?;
    let prop = LadderPropagator::new(p, cutoff, opts.dt);
    let times = opts.sample_times();
    let len = times.len();

    let run_chunk = |chunk: usize| -> Result<(Moments, Moments, [u64; 3])> {
        let mut photon = Moments::new(len);
        let mut rydberg = Moments::new(len);
        let mut jumps = [0u64; 3];
        let lo = chunk * CHUNK;
        let hi = (lo + CHUNK).min(n_traj);
        for i in lo..hi {
            photon.count += 1.0;
            rydberg.count += 1.0;
            let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(master_seed, i as u64));
            let mut sink = MomentSink { photon: &mut photon, rydberg: &mut rydberg, jumps: &mut jumps };
            evolve(state0, p, opts, &prop, &mut rng, &mut sink)?;
        }
        Ok((photon, rydberg, jumps))
    };

    let n_chunks = n_traj.div_ceil(CHUNK);
    let chunks: Vec<_> = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            pool.install(|| (0..n_chunks).into_par_iter().map(run_chunk).collect::<Result<Vec<_>>>())?
        }
        None => (0..n_chunks).into_par_iter().map(run_chunk).collect::<Result<Vec<_>>>()?,
    };

    let mut photon = Moments::new(len);
    let mut rydberg = Moments::new(len);
    let mut jump_counts = [0u64; 3];
    for (ph, ry, j) in &chunks {
        photon.merge(ph);
        rydberg.merge(ry);
        for k in 0..3 {
            jump_counts[k] += j[k];
        }
    }
    Ok(EnsembleResult {
        times,
        stderr_photon: photon.stderr(),
        stderr_rydberg: rydberg.stderr(),
        mean_photon: photon.mean,
        rydberg_pop: rydberg.mean,
        n_traj,
        master_seed,
        jump_counts,
    })
}

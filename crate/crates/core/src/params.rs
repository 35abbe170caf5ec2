//! Physical parameters, state representations and the key-value config format.
//!
//! Internally every rate, detuning and coupling is an angular frequency in
//! rad/us and every time is in us. Config files state ordinary frequencies in
//! MHz; [`mhz`] converts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Numerical slack for norm bounds.
pub const NORM_EPS: f64 = 1e-9;

/// MHz (ordinary frequency) to rad/us.
#[inline]
pub fn mhz(f: f64) -> f64 {
    f * TAU
}

/// rad/us to MHz.
#[inline]
pub fn to_mhz(w: f64) -> f64 {
    w / TAU
}

/// Collective coupling `sqrt(sum |g_n|^2)` of an ensemble with per-atom couplings `g_list`.
pub fn collective_coupling(g_list: &[C64]) -> Result<f64> {
    if g_list.is_empty() {
        return Err(Error::InvalidInput("empty coupling list".into()));
    }
    Ok(g_list.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt())
}

/// Rates, detunings and couplings of the ensemble-cavity system (rad/us).
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Control-laser Rabi frequency, complex.
    pub omega_rabi: C64,
    /// Collective coupling of the ensemble to the cavity mode.
    pub g_collective: f64,
    /// Per-atom coupling in the uniform case; `g_collective / sqrt(n_atoms)`.
    pub g_single: f64,
    pub delta_e: f64,
    pub delta_r: f64,
    pub gamma_e: f64,
    pub gamma_r: f64,
    pub gamma_p: f64,
    pub kappa: f64,
    /// Forster pair-state energy penalty.
    pub delta_p: f64,
    pub n_atoms: usize,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            omega_rabi: C64::new(0.0, 0.0),
            g_collective: 0.0,
            g_single: 0.0,
            delta_e: 0.0,
            delta_r: 0.0,
            gamma_e: 0.0,
            gamma_r: 0.0,
            gamma_p: 0.0,
            kappa: 0.0,
            delta_p: 0.0,
            n_atoms: 1,
        }
    }
}

impl PhysicalParams {
    /// Checks sign constraints and uniform-coupling consistency.
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma_e", self.gamma_e),
            ("gamma_r", self.gamma_r),
            ("gamma_p", self.gamma_p),
            ("kappa", self.kappa),
        ];
        for (key, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::BadValue {
                    key: key.into(),
                    reason: format!("rate must be finite and >= 0, got {v}"),
                });
            }
        }
        if self.n_atoms == 0 {
            return Err(Error::BadValue {
                key: "n_atoms".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.g_collective < 0.0 || self.g_single < 0.0 {
            return Err(Error::BadValue {
                key: "g".into(),
                reason: "couplings are magnitudes and must be >= 0".into(),
            });
        }
        let expect = self.g_single * (self.n_atoms as f64).sqrt();
        if !close_rel(expect, self.g_collective, 1e-9) {
            return Err(Error::BadValue {
                key: "g".into(),
                reason: format!(
                    "g_collective = {} inconsistent with g_single * sqrt(n_atoms) = {}",
                    to_mhz(self.g_collective),
                    to_mhz(expect)
                ),
            });
        }
        Ok(())
    }

    /// Sets the uniform per-atom coupling and the matching collective value.
    pub fn with_uniform_coupling(mut self, g_single: f64, n_atoms: usize) -> Self {
        self.g_single = g_single;
        self.n_atoms = n_atoms;
        self.g_collective = g_single * (n_atoms as f64).sqrt();
        self
    }

    /// Sets the collective coupling directly (per-atom value derived).
    pub fn with_collective_coupling(mut self, g: f64) -> Self {
        self.g_collective = g;
        self.g_single = g / (self.n_atoms as f64).sqrt();
        self
    }

    /// Builds parameters from a parsed config. Frequencies in the config are MHz.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let omega_re = cfg.f64_required("omega")?;
        let omega_im = cfg.f64_or("omega_im", 0.0)?;
        let n_atoms = cfg.usize_or("n_atoms", 1)?;
        if n_atoms == 0 {
            return Err(Error::BadValue {
                key: "n_atoms".into(),
                reason: "must be >= 1".into(),
            });
        }
        let sqrt_n = (n_atoms as f64).sqrt();
        let (g_collective, g_single) = match (cfg.f64_opt("g")?, cfg.f64_opt("g_single")?) {
            (Some(g), Some(g0)) => (mhz(g), mhz(g0)),
            (Some(g), None) => (mhz(g), mhz(g) / sqrt_n),
            (None, Some(g0)) => (mhz(g0) * sqrt_n, mhz(g0)),
            (None, None) => return Err(Error::MissingKey("g (or g_single)".into())),
        };
        let p = PhysicalParams {
            omega_rabi: C64::new(mhz(omega_re), mhz(omega_im)),
            g_collective,
            g_single,
            delta_e: mhz(cfg.f64_required("delta_e")?),
            delta_r: mhz(cfg.f64_or("delta_r", 0.0)?),
            gamma_e: mhz(cfg.f64_required("gamma_e")?),
            gamma_r: mhz(cfg.f64_required("gamma_r")?),
            gamma_p: mhz(cfg.f64_or("gamma_p", 0.0)?),
            kappa: mhz(cfg.f64_required("kappa")?),
            delta_p: mhz(cfg.f64_or("delta_p", 0.0)?),
            n_atoms,
        };
        p.validate()?;
        Ok(p)
    }

    /// Serializes to config text (MHz). Parsing the result with
    /// [`PhysicalParams::from_config`] reproduces every field to within one ulp.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: f64| {
            let _ = writeln!(s, "{k} = {v:?}");
        };
        kv("omega", to_mhz(self.omega_rabi.re));
        kv("omega_im", to_mhz(self.omega_rabi.im));
        kv("g", to_mhz(self.g_collective));
        kv("g_single", to_mhz(self.g_single));
        kv("delta_e", to_mhz(self.delta_e));
        kv("delta_r", to_mhz(self.delta_r));
        kv("gamma_e", to_mhz(self.gamma_e));
        kv("gamma_r", to_mhz(self.gamma_r));
        kv("gamma_p", to_mhz(self.gamma_p));
        kv("kappa", to_mhz(self.kappa));
        kv("delta_p", to_mhz(self.delta_p));
        let _ = writeln!(s, "n_atoms = {}", self.n_atoms);
        s
    }
}

/// Physical keys understood by [`PhysicalParams::from_config`].
pub const PARAM_KEYS: &[&str] = &[
    "omega", "omega_im", "g", "g_single", "n_atoms", "delta_e", "delta_r", "gamma_e", "gamma_r",
    "gamma_p", "kappa", "delta_p",
];

fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Collective single-excitation amplitudes: cavity photon with all atoms in
/// ground (`c_b`), collective intermediate (`c_e`) and Rydberg (`c_r`) excitations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleExcState {
    pub c_b: C64,
    pub c_e: C64,
    pub c_r: C64,
}

impl SingleExcState {
    pub const fn new(c_b: C64, c_e: C64, c_r: C64) -> Self {
        SingleExcState { c_b, c_e, c_r }
    }

    /// One photon loaded in the cavity, atoms in ground.
    pub fn photon_loaded() -> Self {
        SingleExcState::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_b.norm_sqr() + self.c_e.norm_sqr() + self.c_r.norm_sqr()
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.c_b.norm_sqr(), self.c_e.norm_sqr(), self.c_r.norm_sqr()]
    }

    pub fn to_array(self) -> [C64; 3] {
        [self.c_b, self.c_e, self.c_r]
    }

    pub fn from_array(a: [C64; 3]) -> Self {
        SingleExcState::new(a[0], a[1], a[2])
    }
}

/// Amplitudes on the photon-number ladder `n = 0..=cutoff` for each collective
/// atomic state. At most one atomic excitation exists by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FockLadderState {
    pub c_b: Vec<C64>,
    pub c_e: Vec<C64>,
    pub c_r: Vec<C64>,
}

impl FockLadderState {
    pub fn zeros(cutoff: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); cutoff + 1];
        FockLadderState { c_b: z.clone(), c_e: z.clone(), c_r: z }
    }

    /// Atoms in ground, cavity in Fock state `|n>`.
    pub fn fock(n: usize, cutoff: usize) -> Result<Self> {
        if n > cutoff {
            return Err(Error::InvalidInput(format!("Fock index {n} above cutoff {cutoff}")));
        }
        let mut s = FockLadderState::zeros(cutoff);
        s.c_b[n] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn cutoff(&self) -> usize {
        self.c_b.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_b
            .iter()
            .chain(&self.c_e)
            .chain(&self.c_r)
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Rescales to unit norm; returns the norm before rescaling.
    pub fn renormalize(&mut self) -> f64 {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            for c in self.c_b.iter_mut().chain(self.c_e.iter_mut()).chain(self.c_r.iter_mut()) {
                *c *= inv;
            }
        }
        n
    }

    /// `sum_n n (|c_b,n|^2 + |c_e,n|^2 + |c_r,n|^2)`, normalized by the state norm.
    pub fn mean_photon(&self) -> f64 {
        let mut acc = 0.0;
        for n in 0..self.c_b.len() {
            acc += n as f64 * (self.c_b[n].norm_sqr() + self.c_e[n].norm_sqr() + self.c_r[n].norm_sqr());
        }
        acc / self.norm_sqr()
    }

    /// Total Rydberg population, normalized by the state norm.
    pub fn rydberg_population(&self) -> f64 {
        self.c_r.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.norm_sqr()
    }

    /// Photon-number distribution summed over atomic states.
    pub fn photon_distribution(&self) -> Vec<f64> {
        (0..self.c_b.len())
            .map(|n| self.c_b[n].norm_sqr() + self.c_e[n].norm_sqr() + self.c_r[n].norm_sqr())
            .collect()
    }
}

/// Parsed key-value configuration. One `key = value` per line; `#` starts a comment.
/// Raw value text is retained so a config can be re-emitted bit-exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=').or_else(|| line.split_once(':')) else {
                return Err(Error::Syntax {
                    line: i + 1,
                    reason: format!("expected `key = value`, got `{line}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Syntax { line: i + 1, reason: "empty key".into() });
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Syntax { line: i + 1, reason: format!("duplicate key `{k}`") });
            }
        }
        Ok(Config { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Returns an error naming the first key not in `allowed`.
    pub fn check_known(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::BadValue { key: k.into(), reason: "unknown key".into() }),
            None => Ok(()),
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|e| Error::BadValue {
                    key: key.into(),
                    reason: format!("`{v}`: {e}"),
                })
            })
            .transpose()
    }

    pub fn f64_required(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?.ok_or_else(|| Error::MissingKey(key.into()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>().map_err(|e| Error::BadValue {
                    key: key.into(),
                    reason: format!("`{v}`: {e}"),
                })
            })
            .transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize_opt(key)?.unwrap_or(default))
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>().map_err(|e| Error::BadValue {
                    key: key.into(),
                    reason: format!("`{v}`: {e}"),
                })
            })
            .transpose()
    }

    /// Emits `key = value` lines in key order using the raw value text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strong_coupling_text() -> &'static str {
        "# strong coupling\nomega = 20\ng = 10\ndelta_e = 200\ndelta_r = 0\ngamma_e = 1\ngamma_r = 0.01\nkappa = 0.5\n"
    }

    #[test]
    fn collective_coupling_examples() {
        let g = collective_coupling(&[C64::new(3.0, 0.0), C64::new(4.0, 0.0)]).unwrap();
        assert_eq!(g, 5.0);
        let many = vec![C64::new(mhz(1.0), 0.0); 100];
        let g = collective_coupling(&many).unwrap();
        assert!((g - mhz(10.0)).abs() < 1e-12 * mhz(10.0));
        assert!(matches!(collective_coupling(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn strong_coupling_config() {
        let p = PhysicalParams::from_config(&Config::parse(strong_coupling_text()).unwrap()).unwrap();
        assert_eq!(p.omega_rabi, C64::new(mhz(20.0), 0.0));
        assert_eq!(p.g_collective, mhz(10.0));
        assert_eq!(p.delta_e, mhz(200.0));
        assert_eq!(p.kappa, mhz(0.5));
        assert_eq!(p.gamma_r, mhz(0.01));
        assert_eq!(p.n_atoms, 1);
    }

    #[test]
    fn negative_rate_rejected() {
        let text = strong_coupling_text().replace("gamma_e = 1", "gamma_e = -1");
        let err = PhysicalParams::from_config(&Config::parse(&text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::BadValue { ref key, .. } if key == "gamma_e"), "{err}");
    }

    #[test]
    fn g_single_scales_with_sqrt_n() {
        let text = strong_coupling_text().replace("g = 10", "g_single = 0.5\nn_atoms = 100");
        let p = PhysicalParams::from_config(&Config::parse(&text).unwrap()).unwrap();
        assert!((p.g_collective - mhz(5.0)).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_coupling_triple() {
        let text = strong_coupling_text().replace("g = 10", "g = 10\ng_single = 0.5\nn_atoms = 100");
        let err = PhysicalParams::from_config(&Config::parse(&text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::BadValue { ref key, .. } if key == "g"));
    }

    #[test]
    fn missing_key_named() {
        let text = strong_coupling_text().replace("kappa = 0.5\n", "");
        let err = PhysicalParams::from_config(&Config::parse(&text).unwrap()).unwrap_err();
        assert_eq!(err, Error::MissingKey("kappa".into()));
    }

    #[test]
    fn config_syntax() {
        assert!(Config::parse("a = 1\na = 2").is_err());
        assert!(Config::parse("just words").is_err());
        let c = Config::parse("  # comment only\n\nx: 3 # trailing\n").unwrap();
        assert_eq!(c.get("x"), Some("3"));
    }

    #[test]
    fn ladder_observables() {
        let mut s = FockLadderState::fock(3, 5).unwrap();
        assert_eq!(s.mean_photon(), 3.0);
        s.c_r[1] = C64::new(1.0, 0.0);
        s.renormalize();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((s.rydberg_population() - 0.5).abs() < 1e-15);
        assert!(FockLadderState::fock(6, 5).is_err());
    }
}

use nalgebra::DMatrix;
use proptest::prelude::*;
use rydcav::dynamics::{integrate, IntegrateOptions, Model};
use rydcav::gate::{
    build_geometry, fidelity, forster_coupling, gate_quantities, reflection_blocked, reflection_unblocked, Blockade,
    ForsterModel,
};
use rydcav::mcwf::{coherent_ladder_with_threshold, run_trajectory, McwfOptions};
use rydcav::oracle::{build_hamiltonian, collapse_operators, hermiticity_defect, lindblad_evolve, projector, FullSystemSpec, ladder_to_dense};
use rydcav::params::{collective_coupling, mhz, NORM_EPS};
use rydcav::{Config, PhysicalParams, SingleExcState, C64};

fn ulps(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

prop_compose! {
    fn params()(
        om in 0.0..200.0f64, om_im in -50.0..50.0f64, g0 in 0.0..5.0f64, n in 1usize..2000,
        de in -2000.0..2000.0f64, dr in -5.0..5.0f64, ge in 0.0..5.0f64, gr in 0.0..1.0f64,
        gp in 0.0..1.0f64, k in 0.0..5.0f64, dp in -5.0..5.0f64,
    ) -> PhysicalParams {
        PhysicalParams {
            omega_rabi: C64::new(mhz(om), mhz(om_im)),
            delta_e: mhz(de),
            delta_r: mhz(dr),
            gamma_e: mhz(ge),
            gamma_r: mhz(gr),
            gamma_p: mhz(gp),
            kappa: mhz(k),
            delta_p: mhz(dp),
            ..Default::default()
        }
        .with_uniform_coupling(mhz(g0), n)
    }
}

// Parameters for which the reflection formulas are non-singular and lossy.
prop_compose! {
    fn lossy_params()(p in params(), ge in 0.01..5.0f64, k in 0.1..5.0f64) -> PhysicalParams {
        PhysicalParams { gamma_e: mhz(ge), kappa: mhz(k), ..p }
    }
}

proptest! {
    #[test]
    fn config_round_trip_within_one_ulp(p in params()) {
        let q = PhysicalParams::from_config(&Config::parse(&p.to_config_text()).unwrap()).unwrap();
        let pairs = [
            (p.omega_rabi.re, q.omega_rabi.re), (p.omega_rabi.im, q.omega_rabi.im),
            (p.g_collective, q.g_collective), (p.g_single, q.g_single),
            (p.delta_e, q.delta_e), (p.delta_r, q.delta_r), (p.gamma_e, q.gamma_e),
            (p.gamma_r, q.gamma_r), (p.gamma_p, q.gamma_p), (p.kappa, q.kappa), (p.delta_p, q.delta_p),
        ];
        for (a, b) in pairs {
            prop_assert!(ulps(a, b) <= 1, "{a} vs {b}");
        }
        prop_assert_eq!(p.n_atoms, q.n_atoms);
    }

    #[test]
    fn collective_coupling_permutation_and_phase(
        g in prop::collection::vec((0.0..10.0f64, -3.0..3.0f64), 1..40),
        phase in -3.2..3.2f64,
        seed in any::<u64>(),
    ) {
        let list: Vec<C64> = g.iter().map(|&(r, th)| C64::from_polar(r, th)).collect();
        let base = collective_coupling(&list).unwrap();
        let mut perm = list.clone();
        // Deterministic shuffle from the seed.
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let rotated: Vec<C64> = perm.iter().map(|&c| c * C64::from_polar(1.0, phase)).collect();
        let other = collective_coupling(&rotated).unwrap();
        prop_assert!((base - other).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn fidelity_conjugation_invariant(a in (-1.0..1.0f64, -1.0..1.0f64), b in (-1.0..1.0f64, -1.0..1.0f64)) {
        let (r1, r2) = (C64::new(a.0, a.1), C64::new(b.0, b.1));
        let f = fidelity(r1, r2);
        prop_assert!((f - fidelity(r1.conj(), r2.conj())).abs() <= 1e-15);
    }

    #[test]
    fn reflections_are_passive(p in lossy_params(), v in 0.1..100.0f64) {
        let blockade = Blockade::new(vec![C64::new(mhz(v), 0.0); 3]);
        let g = p.g_single;
        let p = p.with_uniform_coupling(g, 3);
        for k in -200..=200 {
            let delta = mhz(0.05 * k as f64);
            if let Ok(r) = reflection_unblocked(&p, delta) {
                prop_assert!(r.norm() <= 1.0 + 1e-9, "R_unblocked({delta}) = {r}");
            }
            if let Ok(r) = reflection_blocked(&p, delta, &blockade) {
                prop_assert!(r.norm() <= 1.0 + 1e-9, "R_blocked({delta}) = {r}");
            }
        }
    }

    #[test]
    fn far_detuned_reflection_tends_to_one(p in lossy_params()) {
        let blockade = Blockade::new(vec![C64::new(mhz(10.0), 0.0)]);
        let g = p.g_single;
        let p = p.with_uniform_coupling(g, 1);
        let dev = |d: f64| {
            let u = (reflection_unblocked(&p, d).unwrap() - 1.0).norm();
            let b = (reflection_blocked(&p, d, &blockade).unwrap() - 1.0).norm();
            u.max(b)
        };
        let (d1, d2) = (mhz(1e6), mhz(1e7));
        let (e1, e2) = (dev(d1), dev(d2));
        prop_assert!(e1 * d1 < 10.0 * p.kappa, "{e1}");
        // Tenfold detuning shrinks the deviation about tenfold.
        prop_assert!(e2 < 0.2 * e1 + 1e-15, "{e1} -> {e2}");
    }

    #[test]
    fn light_shift_has_nonnegative_imaginary_part(p in params(), delta in -100.0..100.0f64) {
        if let Ok(q) = gate_quantities(&p, mhz(delta), &Blockade::new(vec![])) {
            prop_assert!(q.delta_ac.im >= -1e-12 * q.delta_ac.norm());
        }
    }

    #[test]
    fn fidelity_grows_with_blockade_strength(
        g0 in 0.05..0.5f64, om in 20.0..300.0f64, de in 100.0..3000.0f64, v in 0.5..20.0f64,
    ) {
        let p = rydcav::gate::auto_two_photon_resonance(
            &PhysicalParams {
                omega_rabi: C64::new(mhz(om), 0.0),
                delta_e: mhz(de),
                gamma_e: mhz(1.0),
                gamma_r: mhz(0.01),
                gamma_p: mhz(0.01),
                kappa: mhz(1.0),
                ..Default::default()
            }
            .with_uniform_coupling(mhz(g0), 100),
        );
        let base = Blockade::new((0..100).map(|m| C64::new(mhz(v / (1.0 + m as f64)), 0.0)).collect());
        let mut prev = 0.0;
        for e in 0..=12 {
            let s = 10f64.powf(0.5 * e as f64);
            let r_b = reflection_blocked(&p, 0.0, &base.scaled(s)).unwrap();
            let f = fidelity(reflection_unblocked(&p, 0.0).unwrap(), r_b);
            prop_assert!(f >= prev - 1e-12, "scale {s}: {prev} -> {f}");
            prev = f;
        }
    }

    #[test]
    fn forster_coupling_falls_with_distance(nx in 1usize..5, ny in 1usize..5, nz in 1usize..5, off in 0.6..3.0f64) {
        let g = build_geometry([nx, ny, nz], 0.37, off).unwrap();
        prop_assert_eq!(g.len(), nx * ny * nz);
        let v = forster_coupling(&g, &ForsterModel::isotropic(1000.0)).unwrap();
        let mut pairs: Vec<(f64, f64)> = (0..g.len()).map(|m| (g.relative(m).0, v[m].norm())).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            prop_assert!(w[0].0 > 0.0);
            if w[1].0 > w[0].0 * (1.0 + 1e-12) {
                prop_assert!(w[1].1 < w[0].1);
            }
        }
    }

    #[test]
    fn single_excitation_norm_never_grows(p in params()) {
        let dt = rydcav::dynamics::max_step(&p).min(1e-4);
        let tr = integrate(SingleExcState::photon_loaded(), &p, IntegrateOptions::new(0.5, dt).with_stride(50), Model::Full).unwrap();
        let mut prev = 1.0;
        for s in &tr.states {
            let n = s.norm_sqr();
            prop_assert!(n <= prev + NORM_EPS, "{prev} -> {n}");
            prev = n;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dense_hamiltonian_is_hermitian(
        n in 1usize..4, cutoff in 0usize..4,
        g in prop::collection::vec((0.0..5.0f64, -3.0..3.0f64), 3),
        v in prop::collection::vec(0.0..100.0f64, 3),
        p in params(),
    ) {
        let couplings: Vec<C64> = g[..n].iter().map(|&(r, th)| C64::from_polar(mhz(r), th)).collect();
        let inter = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { mhz(v[i + j - 1]) });
        let spec = FullSystemSpec::new(couplings, inter, cutoff).unwrap();
        prop_assert!(hermiticity_defect(&build_hamiltonian(&spec, &p).unwrap()) <= 1e-12);
    }

    #[test]
    fn lindblad_preserves_trace(p in params(), cutoff in 1usize..4) {
        let g = p.g_single.min(mhz(2.0));
        let p = p.with_uniform_coupling(g, 1);
        let p = PhysicalParams { omega_rabi: C64::new(p.omega_rabi.re.min(mhz(10.0)), 0.0), delta_e: p.delta_e.clamp(-mhz(20.0), mhz(20.0)), ..p };
        let spec = FullSystemSpec::uniform(1, p.g_collective, 0.0, cutoff).unwrap();
        let s0 = coherent_ladder_with_threshold(C64::new(0.7, 0.0), cutoff, 1.0).unwrap();
        let h = build_hamiltonian(&spec, &p).unwrap();
        let tr = lindblad_evolve(&h, &collapse_operators(&spec, &p), &projector(&ladder_to_dense(&s0)), 0.5, 2e-4, 500).unwrap();
        for rho in &tr.rhos {
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn mcwf_state_stays_normalized(p in params(), seed in any::<u64>(), alpha in 0.0..2.0f64) {
        let g = p.g_single.min(mhz(2.0));
        let p = p.with_uniform_coupling(g, 1);
        let p = PhysicalParams { delta_e: p.delta_e.clamp(-mhz(50.0), mhz(50.0)), omega_rabi: C64::new(p.omega_rabi.re.min(mhz(20.0)), 0.0), ..p };
        let s0 = coherent_ladder_with_threshold(C64::new(alpha, 0.0), 12, 1e-3).unwrap();
        let tr = run_trajectory(&s0, &p, McwfOptions::new(0.5, 1e-4).with_sample_interval(0.05), seed).unwrap();
        prop_assert!((tr.final_state.norm_sqr() - 1.0).abs() < NORM_EPS);
        for (&n, &r) in tr.mean_photon.iter().zip(&tr.rydberg_pop) {
            prop_assert!(n >= 0.0 && n <= 12.0 + 1e-9);
            prop_assert!((-1e-12..=1.0 + 1e-9).contains(&r));
        }
    }
}

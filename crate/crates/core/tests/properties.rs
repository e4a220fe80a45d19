use cascadia::analytic::{uwm_inversion, uwm_saturation};
use cascadia::cumulant::{solve_ce2, Pauli};
use cascadia::doppler::{doppler_profile, voigt_factor, Averaging, DopplerParams};
use cascadia::ensemble::run_ensemble;
use cascadia::{build_chain, field_observables, solve_steady_state, ModelParams, ModelTag, SolverOptions};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelTag> {
    prop_oneof![Just(ModelTag::Bwm), Just(ModelTag::Eam), Just(ModelTag::Dm), Just(ModelTag::Uwm)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn mean_field_stays_in_bloch_ball_and_is_passive(
        tag in model(),
        beta in 0.001f64..0.5,
        n in 1usize..60,
        s0 in 0.01f64..200.0,
        eta in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let p = ModelParams::from_beta(beta, n, s0).unwrap().with_eta(eta).with_seed(seed);
        let chain = build_chain(&p);
        let ch = (tag == ModelTag::Bwm).then_some(&chain);
        let sol = solve_steady_state(tag, &p, ch, &SolverOptions::default()).unwrap();
        prop_assume!(sol.converged);
        prop_assert!(sol.max_bloch_norm() <= 1.0 + 1e-9);
        let f = field_observables(&sol, &p, ch).unwrap();
        prop_assert!(f.s_out_right + f.s_out_left <= s0 * (1.0 + 1e-6));
        prop_assert!(f.s_out_right >= 0.0 && f.s_out_left >= 0.0);
    }

    #[test]
    fn cumulant_solution_is_physical(
        beta in 0.01f64..0.3,
        n in 2usize..8,
        s0 in 0.1f64..50.0,
        detuning in -1.0f64..1.0,
    ) {
        let mut p = ModelParams::from_beta(beta, n, s0).unwrap();
        p.detuning = detuning;
        let sol = solve_ce2(&p, n, &SolverOptions::default()).unwrap();
        prop_assert!(sol.min_diagonal_covariance() >= -1e-10);
        prop_assert!(sol.inelastic_profile().iter().all(|v| *v >= -1e-10));
        for i in 0..n {
            prop_assert!((-1.0 - 1e-9..=1e-9).contains(&sol.sigma_z[i]));
            for j in 0..n {
                if i == j {
                    continue;
                }
                let a = sol.sigma_xx_cumulant(i, j).unwrap();
                let b = sol.sigma_xx_cumulant(j, i).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                let pm = sol.moment(i, Pauli::Plus, j, Pauli::Minus).unwrap();
                let mp = sol.moment(i, Pauli::Minus, j, Pauli::Plus).unwrap();
                prop_assert!((pm - mp.conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lambert_profile_decays_and_solves_the_ode(s0 in 0.01f64..500.0, d in 0.0f64..400.0) {
        let s = uwm_saturation(s0, d);
        prop_assert!(s > 0.0 && s <= s0 * (1.0 + 1e-12));
        prop_assert!(uwm_saturation(s0, d + 1.0) < s);
        // implicit form ln s + s = ln s0 + s0 - D
        let lhs = s.ln() + s;
        prop_assert!((lhs - (s0.ln() + s0 - d)).abs() < 1e-9 * (1.0 + lhs.abs()));
        let z = uwm_inversion(s);
        prop_assert!((z + 1.0 / (1.0 + s)).abs() < 1e-14);
    }

    #[test]
    fn broadening_slows_depletion(xi in 0.0f64..50.0, extra in 0.01f64..20.0, s0 in 0.1f64..100.0, d_max in 1.0f64..200.0) {
        let narrow = doppler_profile(&DopplerParams::new(xi, s0, d_max)).unwrap();
        let wide = doppler_profile(&DopplerParams::new(xi + extra, s0, d_max)).unwrap();
        for w in narrow.windows(2) {
            prop_assert!(w[1].1 <= w[0].1);
        }
        for (a, b) in narrow.iter().zip(&wide) {
            prop_assert!(b.1 >= a.1 * (1.0 - 1e-10));
        }
        prop_assert!(voigt_factor(s0, xi + extra) <= voigt_factor(s0, xi));
    }

    #[test]
    fn gauss_hermite_converged_for_narrow_broadening(xi in 0.0f64..0.1, s0 in 0.1f64..100.0) {
        let run = |nodes| {
            let mut p = DopplerParams::new(xi, s0, 40.0);
            p.averaging = Averaging::GaussHermite;
            p.n_nodes = nodes;
            doppler_profile(&p).unwrap()
        };
        for (a, b) in run(64).iter().zip(&run(128)) {
            prop_assert!((a.1 - b.1).abs() <= 1e-8 * a.1.max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn ensemble_is_reproducible_and_thread_independent(
        eta in 0.0f64..0.5,
        s0 in 0.5f64..30.0,
        seed in 0u64..u64::MAX,
    ) {
        let p = ModelParams::from_beta(0.02, 40, s0).unwrap().with_eta(eta).with_seed(seed);
        let o = SolverOptions::default();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_ensemble(&p, 5, &o)).unwrap();
        let b = three.install(|| run_ensemble(&p, 5, &o)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a.realization_sigma_z, &b.realization_sigma_z);
        for (m, v) in a.mean_diff.iter().zip(&a.variance) {
            prop_assert!(m * m <= v * (1.0 + 1e-12) + 1e-300);
        }
    }
}

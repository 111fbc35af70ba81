mod common;

use std::f64::consts::{FRAC_PI_4, PI};

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use volterra_mr::bergman::{bergman_norm, choose_exponent, translation_apply, EmbeddingParams, SectorSpec};
use volterra_mr::boundary::dirichlet_map;
use volterra_mr::harness::{ExperimentConfig, Scenario};
use volterra_mr::kernels::MemoryKernel;
use volterra_mr::regularity::{
    admissibility_constant, observation_energy, random_unit_vector, sample_norms, Observation, ProbeSet,
};
use volterra_mr::spectral::{SpectralOperator, StateVector};
use volterra_mr::volterra::{solve_augmented, solve_cq, Forcing, VolterraProblem};

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-5.0f64..5.0, n).prop_map(StateVector::new)
}

fn kernel() -> impl Strategy<Value = MemoryKernel> {
    (0.1f64..3.0, 0.2f64..4.0, 0u32..3).prop_map(|(b, g, m)| MemoryKernel::monomial_exponential(b, g, m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_property(n in 1usize..=256, t in 0.0f64..2.0, s in 0.0f64..2.0, seed in any::<u64>()) {
        let op = SpectralOperator::dirichlet(n).unwrap();
        let x = random_unit_vector(&mut ChaCha8Rng::seed_from_u64(seed), n).scaled(3.0);
        let lhs = op.semigroup_apply(t, &op.semigroup_apply(s, &x).unwrap()).unwrap();
        let rhs = op.semigroup_apply(t + s, &x).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn observation_energy_matches_closed_form(x in state(12), window in 1e-3f64..5.0) {
        let op = SpectralOperator::dirichlet(12).unwrap();
        let e = observation_energy(&op, &Observation::FractionalPower(0.5), 2.0, window, &x).unwrap();
        let exact: f64 = x.as_slice().iter().zip(op.eigenvalues())
            .map(|(c, l)| -c * c * (-2.0 * l * window).exp_m1() / 2.0)
            .sum();
        prop_assert!((e - exact).abs() <= 1e-8 * exact.max(1e-300));
        prop_assert!(e <= 0.5 * x.norm().powi(2) * (1.0 + 1e-12));
    }

    #[test]
    fn extrapolation_norm_is_dominated(x in state(20), mu in 0.0f64..50.0, neumann in any::<bool>()) {
        let op = if neumann { SpectralOperator::neumann(20, 1.0).unwrap() } else { SpectralOperator::dirichlet(20).unwrap() };
        let bound = op.resolvent_norm(mu);
        prop_assert!((bound - 1.0 / (mu + op.eigenvalues()[0])).abs() <= 1e-15 * bound);
        prop_assert!(op.extrapolation_norm(mu, &x).unwrap() <= bound * x.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn kernel_evaluation_is_holomorphic(k in kernel(), re in 0.05f64..4.0, frac in -0.95f64..0.95) {
        let z = Complex64::new(re, frac * re);
        let h = 1e-5;
        let dx = (k.eval(z + h).unwrap() - k.eval(z - h).unwrap()) / (2.0 * h);
        let dy = (k.eval(z + Complex64::i() * h).unwrap() - k.eval(z - Complex64::i() * h).unwrap()) / (2.0 * h);
        // f' = ∂_x f = -i ∂_y f
        let scale = 1.0 + dx.norm();
        prop_assert!((dx + Complex64::i() * dy).norm() <= 1e-8 * scale);
    }

    #[test]
    fn bergman_norm_matches_polar_oracle(k in kernel(), q in 2.0f64..6.0, theta in 0.2f64..1.3) {
        let n = bergman_norm(&k, SectorSpec::new(theta, q).unwrap()).unwrap().norm;
        let oracle = sector_norm_oracle(&k, q, theta);
        prop_assert!((n - oracle).abs() <= 1e-6 * oracle, "{} vs {}", n, oracle);
    }

    #[test]
    fn bergman_norm_is_homogeneous_and_monotone(g in 0.3f64..3.0, scale in 0.1f64..10.0, t1 in 0.2f64..1.4, dt in 0.01f64..0.15) {
        let k = MemoryKernel::exponential(1.0, g).unwrap();
        let spec = SectorSpec::new(t1, 3.0).unwrap();
        let base = bergman_norm(&k, spec).unwrap().norm;
        let scaled = bergman_norm(&k.with_beta(scale), spec).unwrap().norm;
        prop_assert!((scaled - scale * base).abs() <= 1e-7 * scaled);
        let wider = bergman_norm(&k, SectorSpec::new(t1 + dt, 3.0).unwrap()).unwrap().norm;
        prop_assert!(base <= wider * (1.0 + 1e-9));
    }

    #[test]
    fn translation_never_increases_norm(k in kernel(), t in 0.0f64..2.0) {
        let spec = SectorSpec::new(FRAC_PI_4, 4.0).unwrap();
        let base = bergman_norm(&k, spec).unwrap().norm;
        let shifted = bergman_norm(&translation_apply(&k, t).unwrap(), spec).unwrap().norm;
        prop_assert!(shifted <= base * (1.0 + 1e-7));
    }

    #[test]
    fn exponent_choice_for_q_above_two(q in 2.0001f64..20.0, l in 1.0001f64..20.0) {
        let c = choose_exponent(q, l).unwrap();
        prop_assert!(c.s > 1.0 && c.s < 2.0);
        prop_assert!(c.p > 1.0 && c.p <= l);
        prop_assert!((c.p - q * (c.s - 1.0) / c.s).abs() <= 1e-14 * c.p);
    }

    #[test]
    fn no_exponent_exists_for_q_at_most_two(q in 1.0001f64..=2.0, l in 1.0001f64..20.0) {
        prop_assert!(choose_exponent(q, l).is_err());
    }

    #[test]
    fn embedding_constant_shrinks_with_radius(q in 2.5f64..12.0, frac in 0.1f64..0.9, theta in 0.2f64..1.5, r in 0.01f64..100.0) {
        // s ∈ (q/(q-1), 2) when q > 2
        let lo = q / (q - 1.0);
        let s = lo + frac * (2.0 - lo);
        let params = EmbeddingParams::new(q, s, theta, None).unwrap();
        prop_assert!(params.constant(r / 2.0).c_r < params.constant(r).c_r);
        let opt = EmbeddingParams::optimized(q, s, theta).unwrap();
        prop_assert!(opt.constant(r).c_r <= params.constant(r).c_r * (1.0 + 1e-12));
    }

    #[test]
    fn dirichlet_map_inverts_trace(lambda in 0.0f64..1e6, u0 in -10.0f64..10.0, u1 in -10.0f64..10.0) {
        let op = SpectralOperator::dirichlet(16).unwrap();
        let d = dirichlet_map(&op, lambda, [u0, u1]).unwrap().trace();
        prop_assert!((d[0] - u0).abs() <= 1e-10 && (d[1] - u1).abs() <= 1e-10);
    }

    #[test]
    fn config_round_trip(seed in proptest::option::of(any::<u64>()), modes in 1usize..500, dt in 1e-5f64..1e-2, tol in 1e-12f64..1e-2) {
        let mut c = ExperimentConfig::new(Scenario::Solve);
        if let Some(s) = seed {
            c.set("seed", &s.to_string()).unwrap();
        }
        c.set("modes", &modes.to_string()).unwrap();
        c.set("dt", &dt.to_string()).unwrap();
        c.set("tol", &tol.to_string()).unwrap();
        prop_assert_eq!(ExperimentConfig::parse(Scenario::Solve, &c.render()).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kernel_lp_norm_matches_closed_form(b in 0.1f64..5.0, g in 0.1f64..5.0) {
        let k = MemoryKernel::exponential(b, g).unwrap();
        for p in [1.0, 2.0, 4.0 / 3.0] {
            for horizon in [0.1, 1.0, 50.0 / g] {
                let got = k.lp_halfline_norm(p, horizon).unwrap();
                let exact = k.exponential_lp_closed_form(p, horizon).unwrap();
                prop_assert!((got - exact).abs() <= 1e-10 * exact, "p={} T={}", p, horizon);
                prop_assert!((exact - kernel_lp_oracle(&k, p, horizon)).abs() <= 1e-12 * exact);
            }
        }
    }

    #[test]
    fn trajectories_are_linear(s1 in 1u64..1000, s2 in 1u64..1000, c in -3.0f64..3.0, cq in any::<bool>()) {
        let op = SpectralOperator::dirichlet(8).unwrap();
        let (dt, steps) = (2e-3, 200);
        let f1 = Forcing::random_band_limited(8, 4, dt, steps, s1);
        let f2 = Forcing::random_band_limited(8, 8, dt, steps, s2).scaled(c);
        let k = MemoryKernel::exponential(1.5, 0.7).unwrap();
        let solve = |f: Forcing| {
            let p = VolterraProblem::new(op.clone(), 0.5, k, f).unwrap();
            if cq { solve_cq(&p).unwrap() } else { solve_augmented(&p).unwrap() }
        };
        let a = solve(f1.clone());
        let b = solve(f2.clone());
        let ab = solve(f1.sum(&f2).unwrap());
        let scale = 1.0 + max_norm(&ab.z);
        for j in 0..ab.len() {
            prop_assert!((&(&a.z[j] + &b.z[j]) - &ab.z[j]).norm() <= 1e-12 * scale);
            prop_assert!((&(&a.w[j] + &b.w[j]) - &ab.w[j]).norm() <= 1e-10 * (1.0 + max_norm(&ab.w)));
        }
    }
}

#[test]
fn admissibility_bound_holds_on_fresh_states() {
    let op = SpectralOperator::dirichlet(24).unwrap();
    let obs = Observation::FractionalPower(0.5);
    let report = admissibility_constant(&op, &obs, 2.0, 1.0, ProbeSet::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for _ in 0..1000 {
        let x = random_unit_vector(&mut rng, 24);
        let e = observation_energy(&op, &obs, 2.0, 1.0, &x).unwrap();
        assert!(
            e.sqrt() <= report.gamma_hat * (1.0 + 1e-9),
            "{} > {}",
            e.sqrt(),
            report.gamma_hat
        );
    }
}

#[test]
fn lp_norms_settle_under_mode_doubling() {
    let (dt, steps) = (1e-3, 500);
    let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
    let norms = |n: usize| {
        let op = SpectralOperator::dirichlet(n).unwrap();
        // smooth in space: coefficients of sin-modes decaying like k^{-4}
        let x = StateVector::new((1..=n).map(|k| (PI * k as f64).powi(-4) * 100.0).collect());
        let prob = VolterraProblem::new(op, 0.5, k, Forcing::constant(x, dt, steps)).unwrap();
        let traj = solve_augmented(&prob).unwrap();
        let s = sample_norms(&prob, &traj, 2.0, 0, 6.0, FRAC_PI_4).unwrap();
        [s.zdot, s.az, s.z, s.w]
    };
    let (a, b) = (norms(128), norms(256));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 0.01 * y, "{a:?} vs {b:?}");
    }
}

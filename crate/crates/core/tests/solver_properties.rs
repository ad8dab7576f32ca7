use extrastep::linalg::dist_sq;
use extrastep::{
    auto_parameters, gen_policeman_burglar, gen_quadratic_vi, run_solver, EstimatorKind, Quantizer, Regime,
    SolverConfig,
};
use proptest::prelude::*;

#[test]
fn repeated_runs_are_bitwise_identical() {
    let p = gen_policeman_burglar(3, 0.6, 3.0, 4).unwrap();
    let q = Quantizer::rand_k(4, p.dim()).unwrap();
    for kind in [EstimatorKind::Vr, EstimatorKind::Coord, EstimatorKind::Qvr(q), EstimatorKind::Noisy { sigma: 0.3 }] {
        let auto = auto_parameters(&p, &kind, Regime::Monotone, None).unwrap();
        let cfg = SolverConfig { tau: auto.tau, seed: 9, ..SolverConfig::new(auto.gamma, 300) };
        let a = run_solver(&p, &kind, &cfg).unwrap();
        let b = run_solver(&p, &kind, &cfg).unwrap();
        assert_eq!(a, b, "{}", kind.name());
        let other = run_solver(&p, &kind, &SolverConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.z_final, other.z_final, "{}", kind.name());
    }
}

#[test]
fn averaged_gap_is_nonincreasing_at_decade_scale() {
    let p = gen_policeman_burglar(4, 0.6, 3.0, 2).unwrap();
    let gamma = 1.0 / (3.0 * p.constants().lipschitz);
    let t = run_solver(&p, &EstimatorKind::FullDet, &SolverConfig::new(gamma, 3000)).unwrap();
    let at = |k: usize| t.rows.iter().find(|r| r.k == k).unwrap().gap_avg.unwrap();
    assert!(at(1000) <= at(100));
    assert!(at(3000) <= at(300));
}

#[test]
fn variance_reduced_methods_converge_linearly_on_quadratics() {
    let p = gen_quadratic_vi(12, 0.5, 3.0, 8).unwrap();
    let q = Quantizer::rand_k(3, 12).unwrap();
    for kind in [EstimatorKind::Coord, EstimatorKind::Quant(q)] {
        let auto = auto_parameters(&p, &kind, Regime::StronglyMonotone, None).unwrap();
        let cfg = SolverConfig {
            tau: auto.tau,
            regime: Regime::StronglyMonotone,
            seed: 1,
            ..SolverConfig::new(auto.gamma, 40_000)
        };
        let t = run_solver(&p, &kind, &cfg).unwrap();
        let v0 = t.rows[0].dist_sq.unwrap();
        assert!(t.last().dist_sq.unwrap() < 1e-6 * v0, "{}: {}", kind.name(), t.last().dist_sq.unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn game_runs_stay_feasible_with_nonnegative_gaps(seed in 0u64..10_000, tau in 0.0f64..0.9) {
        let p = gen_policeman_burglar(3, 0.6, 3.0, seed).unwrap();
        let kind = EstimatorKind::Vr;
        let auto = auto_parameters(&p, &kind, Regime::Monotone, Some(tau)).unwrap();
        let cfg = SolverConfig { tau, seed, ..SolverConfig::new(auto.gamma, 200) };
        let t = run_solver(&p, &kind, &cfg).unwrap();
        prop_assert!(p.prox().is_feasible(&t.z_final, 1e-10));
        prop_assert!(p.prox().is_feasible(t.averaged.as_ref().unwrap(), 1e-10));
        for r in &t.rows {
            prop_assert!(r.gap_last.unwrap() >= -1e-10 && r.gap_avg.unwrap() >= -1e-10);
        }
    }

    #[test]
    fn fulldet_contracts_on_random_quadratics(seed in 0u64..10_000, mu in 0.05f64..1.0, l in 1.0f64..10.0) {
        let p = gen_quadratic_vi(8, mu, l, seed).unwrap();
        let auto = auto_parameters(&p, &EstimatorKind::FullDet, Regime::StronglyMonotone, None).unwrap();
        let cfg = SolverConfig { regime: Regime::StronglyMonotone, ..SolverConfig::new(auto.gamma, 200) };
        let t = run_solver(&p, &EstimatorKind::FullDet, &cfg).unwrap();
        let v0 = t.rows[0].lyapunov.unwrap();
        let rate = 1.0 - auto.gamma * mu / 16.0;
        for r in &t.rows[1..] {
            prop_assert!(r.lyapunov.unwrap() <= rate.powi(r.k as i32 - 1) * v0 * (1.0 + 1e-12));
        }
        let zs = p.known_solution().unwrap();
        prop_assert!(dist_sq(&t.z_final, zs) <= dist_sq(&t.z0, zs));
    }
}

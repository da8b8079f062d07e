use klreg::index::{
    a_priori_alpha, companion, kl_alpha_choice, kl_from_psi, phi3_from_phi4, phi3_from_psi2, phi4_from_phi3,
    psi2_from_phi3, psi_from_kl, IndexFunction, KLDescription,
};
use klreg::kl::levelset_bound_check;
use klreg::lab::{run_experiment, ChoiceRule, ExperimentPlan, NoiseModel};
use klreg::model::{make_noisy, Noise, Operator, Vector};
use klreg::penalty::Penalty;
use klreg::regularity::{j_rate, t_rate};
use klreg::solver::TikhonovProblem;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn vector(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-3.0..3.0f64, n).prop_map(Vector::from_vec)
}

fn penalty() -> impl Strategy<Value = Penalty> {
    prop_oneof![Just(Penalty::Quadratic), (1.05..2.0f64).prop_map(|q| Penalty::power_norm(q).unwrap())]
}

fn sigma(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, n).prop_map(|mut s| {
        s.sort_by(|a, b| b.total_cmp(a));
        s
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fenchel_young(pen in penalty(), (x, p) in (1usize..12).prop_flat_map(|n| (vector(n), vector(n)))) {
        let lhs = pen.eval(&x) + pen.conjugate(&p);
        prop_assert!(lhs - p.dot(&x) >= -1e-10 * (1.0 + lhs.abs()));
        let g = pen.subgradient(&x);
        let eq = pen.eval(&x) + pen.conjugate(&g) - g.dot(&x);
        prop_assert!(eq.abs() <= 1e-10 * (1.0 + pen.eval(&x) + pen.conjugate(&g)));
    }

    #[test]
    fn penalty_is_convex(
        pen in penalty(),
        (x, z) in (1usize..12).prop_flat_map(|n| (vector(n), vector(n))),
        l in 0.0..1.0f64,
    ) {
        let mid = pen.eval(&(&x * l + &z * (1.0 - l)));
        let chord = l * pen.eval(&x) + (1.0 - l) * pen.eval(&z);
        prop_assert!(mid <= chord + 1e-10 * (1.0 + chord));
        prop_assert!(pen.bregman_at(&x, &z) >= 0.0);
    }

    #[test]
    fn adjoint_pairs_consistently(
        (m, n, entries) in (1usize..10, 1usize..10).prop_flat_map(|(m, n)| {
            (Just(m), Just(n), prop::collection::vec(-2.0..2.0f64, m * n))
        }),
        seed in 0u64..1000,
    ) {
        let op = Operator::dense(DMatrix::from_vec(m, n, entries)).unwrap();
        let x = klreg::model::gaussian_direction(n, seed, 0);
        let y = klreg::model::gaussian_direction(m, seed, 1);
        let a = op.apply(&x).unwrap().dot(&y);
        let b = x.dot(&op.adjoint_apply(&y).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn interpolation_inequality(
        (s, x) in (2usize..60).prop_flat_map(|n| (sigma(n), vector(n))),
        q in 0.05..2.0f64,
        frac in 0.0..1.0f64,
    ) {
        let op = Operator::diagonal(s).unwrap();
        let r = q * frac;
        let lhs = op.power_astar_a(r, &x).unwrap().norm();
        let rhs = op.power_astar_a(q, &x).unwrap().norm().powf(r / q) * x.norm().powf(1.0 - r / q);
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn psi2_round_trip(c in 0.1..10.0f64, kappa in 0.05..1.95f64) {
        let phi3 = IndexFunction::power_law(c, kappa).unwrap();
        let (c2, k2) = phi3_from_psi2(&psi2_from_phi3(&phi3).unwrap()).unwrap().as_power_law().unwrap();
        prop_assert!((k2 - kappa).abs() <= 1e-14);
        prop_assert!(rel(c2, c) < 1e-10);
    }

    #[test]
    fn distance_bound_round_trip(c in 0.1..10.0f64, kappa in 0.05..0.95f64) {
        let phi3 = IndexFunction::power_law(c, kappa).unwrap();
        let (c2, k2) = phi3_from_phi4(&phi4_from_phi3(&phi3).unwrap()).unwrap().as_power_law().unwrap();
        prop_assert!((k2 - kappa).abs() <= 1e-14);
        prop_assert!(rel(c2, c) < 1e-10);
    }

    #[test]
    fn kl_round_trip_keeps_exponent(c in 0.1..10.0f64, q in 0.05..3.0f64, norm in 0.1..10.0f64) {
        let psi = IndexFunction::power_law(c, q).unwrap();
        let kl = kl_from_psi(&psi, norm).unwrap();
        let (_, q2) = psi_from_kl(&kl).unwrap().as_power_law().unwrap();
        prop_assert!((q2 - q).abs() <= 1e-12);
    }

    #[test]
    fn kl_choice_rate_bound(p in 0.05..1.0f64, c in 0.1..10.0f64, delta in 1e-6..1.0f64) {
        let kl = KLDescription::new(IndexFunction::power_law(c, p).unwrap(), 1.0, 1.0).unwrap();
        let choice = kl_alpha_choice(&kl, delta).unwrap();
        prop_assert!(choice.alpha > 0.0);
        prop_assert!(choice.rate_bound <= choice.phi_value * (1.0 + 1e-12));
    }

    #[test]
    fn a_priori_alpha_is_monotone(c in 0.1..10.0f64, p in 0.05..2.0f64, d in 1e-8..1e-2f64, f in 1.01..10.0f64) {
        let psi2 = IndexFunction::power_law(c, p).unwrap();
        let (_, e) = companion(&psi2).unwrap().as_power_law().unwrap();
        prop_assert!((e - (p + 1.0) / 2.0).abs() <= 1e-15);
        prop_assert!(a_priori_alpha(&psi2, d).unwrap() < a_priori_alpha(&psi2, d * f).unwrap());
    }

    #[test]
    fn strong_duality_and_stationarity(
        (s, x) in (1usize..30).prop_flat_map(|n| (sigma(n), vector(n))),
        log_alpha in -6.0..0.0f64,
    ) {
        let alpha = 10f64.powf(log_alpha);
        let prob = TikhonovProblem::noise_free(Operator::diagonal(s).unwrap(), Penalty::Quadratic, x.clone()).unwrap();
        let sol = prob.solve(alpha).unwrap();
        let gap = prob.objective_gap(&sol, &x).unwrap();
        prop_assert!(gap >= 0.0);
        let dual = prob.dual_objective(alpha, &sol.dual_z).unwrap();
        prop_assert!(rel(dual, gap / alpha) <= 1e-10 || (dual - gap / alpha).abs() <= 1e-15);
        let g = prob.gradient(alpha, &sol.x_alpha).unwrap();
        prop_assert!(g.norm() <= 1e-10 * (1.0 + prob.y_obs.norm()));
    }

    #[test]
    fn power_norm_solutions_are_stationary(
        (s, x) in (1usize..20).prop_flat_map(|n| (sigma(n), vector(n))),
        q in 1.1..2.0f64,
        log_alpha in -4.0..0.0f64,
    ) {
        let alpha = 10f64.powf(log_alpha);
        let prob = TikhonovProblem::noise_free(Operator::diagonal(s).unwrap(), Penalty::power_norm(q).unwrap(), x).unwrap();
        let sol = prob.solve(alpha).unwrap();
        let g = prob.gradient(alpha, &sol.x_alpha).unwrap();
        prop_assert!(g.norm() <= 1e-8 * (1.0 + prob.y_obs.norm()));
    }

    #[test]
    fn level_set_bound_never_fails(
        (s, x, pts) in (2usize..30).prop_flat_map(|n| (sigma(n), vector(n), prop::collection::vec(vector(n), 1..8))),
        log_alpha in -6.0..0.0f64,
    ) {
        let alpha = 10f64.powf(log_alpha);
        let prob = TikhonovProblem::noise_free(Operator::diagonal(s).unwrap(), Penalty::Quadratic, x).unwrap();
        let phi = IndexFunction::power_law(1.0, 0.5).unwrap();
        prop_assert!(levelset_bound_check(&prob, alpha, &phi, (2.0 / alpha).sqrt(), &pts).unwrap());
    }

    #[test]
    fn rate_ladder(
        (s, x) in (2usize..40).prop_flat_map(|n| (sigma(n), vector(n))),
        alphas in prop::collection::vec(1e-6..1.0f64, 1..8),
    ) {
        let prob = TikhonovProblem::noise_free(Operator::diagonal(s).unwrap(), Penalty::Quadratic, x).unwrap();
        let psi1 = j_rate(&prob, &alphas).unwrap();
        let psi2 = t_rate(&prob, &alphas).unwrap();
        for (a, b) in psi1.iter().zip(&psi2) {
            prop_assert!(b.value <= a.value * (1.0 + 1e-12) + 1e-300);
            prop_assert!(a.value <= 2.0 * b.value * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn noise_has_requested_norm(y in vector(20), delta in 1e-3..10.0f64, seed in 0u64..10_000) {
        let yd = make_noisy(&y, delta, &Noise::seeded(seed)).unwrap();
        prop_assert!(rel((yd - &y).norm(), delta) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn experiments_are_reproducible(seed in 0u64..1000, n in 5usize..40) {
        let op = Operator::power_decay(n, 1.0).unwrap();
        let x = op.power_astar_a(0.25, &klreg::model::SourceProfile::Alternating.element(n)).unwrap();
        let prob = TikhonovProblem::noise_free(op, Penalty::Quadratic, x).unwrap();
        let plan = ExperimentPlan {
            deltas: vec![1e-4, 1e-3, 1e-2],
            rule: ChoiceRule::PowerLaw { coefficient: 1.0, exponent: 1.0 },
            noise: NoiseModel::White,
            repetitions: 3,
            seed,
        };
        let a = run_experiment(&prob, &plan).unwrap();
        let b = run_experiment(&prob, &plan).unwrap();
        prop_assert_eq!(&a, &b);
        for r in &a {
            prop_assert!(r.alpha_used > 0.0);
            prop_assert!(r.bregman_error >= 0.0 && r.x_error_z >= 0.0 && r.j_gap >= 0.0);
            prop_assert!(r.residual_sq >= 0.0 && r.tikhonov_gap >= 0.0);
        }
    }
}

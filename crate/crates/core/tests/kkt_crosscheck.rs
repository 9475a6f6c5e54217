use nalgebra::DMatrix;
use proptest::prelude::*;
use queuecap::dist::{Pmf, RateParams, ServiceModel, Tau};
use queuecap::entmax::{solve_full, solve_gfeedback, SolverOptions};
use queuecap::kkt::{
    expected_log_scores, linked_deviations_alternate, recursion_closed_form, receq_residuals, residual_full,
    residual_gfeedback, toeplitz_build, toeplitz_homogeneous_null, KktError,
};

fn q_law() -> impl Strategy<Value = Pmf<f64>> {
    (0.05f64..1.0, prop::collection::vec(0.0f64..1.0, 0..7)).prop_map(|(q0, rest)| {
        let mut w = vec![q0];
        w.extend(rest);
        let z: f64 = w.iter().sum();
        Pmf::new(w.iter().map(|v| v / z).collect()).unwrap()
    })
}

fn dense(sys: &queuecap::kkt::ToeplitzSystem<f64>) -> DMatrix<f64> {
    let m = sys.matrix();
    DMatrix::from_fn(sys.n, sys.n, |i, j| m[i][j])
}

proptest! {
    #[test]
    fn sigma_min_matches_svd(q in q_law(), n in 1usize..24) {
        let sys = toeplitz_build(&q, n, 1.0).unwrap();
        let ours = sys.sigma_min().unwrap();
        let sv = dense(&sys).singular_values();
        let svd = sv.min();
        // SVD is accurate to about eps·σ_max in absolute terms
        prop_assert!((ours - svd).abs() <= 1e-8 * svd + 1e-13 * sv.max(), "{} vs {}", ours, svd);
    }

    #[test]
    fn triangular_with_constant_diagonal(q in q_law(), n in 1usize..24) {
        let sys = toeplitz_build(&q, n, 0.5).unwrap();
        let a = dense(&sys);
        let q0 = q.get(0);
        // every eigenvalue is then q_0
        prop_assert!(a.upper_triangle() == DMatrix::from_diagonal(&a.diagonal()));
        prop_assert!(a.diagonal().iter().all(|&d| d == q0));
        let verdict = toeplitz_homogeneous_null(&sys).unwrap();
        prop_assert_eq!(verdict.diagonal, q0);
        prop_assert!(verdict.only_zero_solution);
    }

    #[test]
    fn forward_substitution_matches_lu(q in q_law(), n in 1usize..24, delta in 0.01f64..3.0) {
        let sys = toeplitz_build(&q, n, delta).unwrap();
        let ours = sys.solve_rhs().unwrap();
        let lu = dense(&sys).lu().solve(&nalgebra::DVector::from_vec(sys.rhs.clone())).unwrap();
        // rounding can grow by up to (1/q_0)^n through the substitution
        let growth = (1.0 / q.get(0)).powi(n as i32);
        let tol = 1e-14 * (n * n) as f64 * growth * n as f64 * delta;
        for (a, b) in ours.iter().zip(lu.iter()) {
            prop_assert!((a - b).abs() <= tol);
        }
        // the linear profile z_k = k δ solves the stationarity system
        for (k, z) in ours.iter().enumerate() {
            prop_assert!((z - (k + 1) as f64 * delta).abs() <= tol);
        }
    }

    #[test]
    fn closed_form_satisfies_recurrence(q in 0.01f64..0.99, g in -2.0f64..2.0, d in -2.0f64..2.0, n in 1usize..40) {
        let x = recursion_closed_form(q, g, d, n).unwrap();
        prop_assert_eq!(x.len(), n + 1);
        for (k, r) in receq_residuals(q, g, d, &x).iter().enumerate() {
            let scale = 1f64.max(x[k].abs()).max(x[k + 1].abs());
            prop_assert!(r.abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn zero_leading_term_is_rejected() {
    let q = Pmf::new(vec![0.0, 0.5, 0.5]).unwrap();
    let sys = toeplitz_build(&q, 4, 1.0).unwrap();
    assert!(matches!(sys.solve_rhs(), Err(KktError::ZeroQ0 { shift: 1 })));
    assert!(toeplitz_homogeneous_null(&sys).is_err());
}

#[test]
fn solver_optima_are_stationary_for_uniform_services() {
    let opts = SolverOptions::default();
    for (a, b) in [(1, 2), (1, 3), (0, 3), (2, 5)] {
        let s = ServiceModel::<f64>::uniform_range(a, b).unwrap();
        for frac in [0.2, 0.5, 0.8] {
            let rate = RateParams::for_service(&s, frac * s.rate_mu, Tau::Infinite).unwrap();
            let full = solve_full(&s, &rate, &opts).unwrap();
            let r = residual_full(&full, &s).unwrap();
            assert!(r.max_abs_residual < 1e-7, "full {a}..{b} {frac}: {}", r.max_abs_residual);
            // fitted slope agrees with the solver's mean multiplier
            assert!((r.fitted_multipliers.1 - full.multiplier_mean).abs() < 1e-6);
            for tau in 0..b as u64 {
                let g = solve_gfeedback(&s, &rate, tau, &opts).unwrap();
                let r = residual_gfeedback(&g, &s, tau).unwrap();
                assert!(r.max_abs_residual < 1e-7, "τ={tau} {a}..{b} {frac}: {}", r.max_abs_residual);
            }
        }
    }
}

#[test]
fn scores_follow_output_law() {
    let s = ServiceModel::<f64>::uniform_range(1, 2).unwrap();
    let v = Pmf::new(vec![0.0, 0.25, 0.5, 0.25]).unwrap();
    let x = expected_log_scores(&v, &s.pmf).unwrap();
    assert_eq!(x.len(), 2);
    assert!((x[0] - 0.5 * (4f64.ln() + 2f64.ln())).abs() < 1e-15);
    assert!((x[1] - 0.5 * (2f64.ln() + 4f64.ln())).abs() < 1e-15);
}

#[test]
fn alternation_on_linked_pairs_at_an_optimum() {
    let s = ServiceModel::<f64>::uniform_range(1, 2).unwrap();
    let rate = RateParams::for_service(&s, 0.4, Tau::Infinite).unwrap();
    let sol = solve_gfeedback(&s, &rate, 1, &SolverOptions::default()).unwrap();
    let r = residual_gfeedback(&sol, &s, 1).unwrap();
    let (gamma, delta) = r.fitted_multipliers;
    let dev = queuecap::kkt::deviations(&r.scores, gamma, delta);
    assert!(linked_deviations_alternate(&dev, &r.active_set, 1e-9));
}

use amoo_core::parallel::Exec;
use amoo_core::suites::*;

#[test]
fn lower_bound_closed_form_and_inequality() {
    let s = lower_bound_suite(16, 16, &[4, 8, 16]).unwrap();
    assert!(s.max_abs_error <= 1e-10, "{}", s.max_abs_error);
    assert_eq!(s.inequality.rows.len(), 3);
    assert!(s.inequality.all_pass(), "{:?}", s.inequality.rows);
}

#[test]
fn upper_bounds_hold_on_every_prefix() {
    let cases = bound_suite(256, Exec::Parallel).unwrap();
    assert_eq!(cases.len(), 4 * 3 + 3);
    for c in &cases {
        let worst = c.report.rows.iter().map(|r| r.empirical / r.bound).fold(0.0, f64::max);
        assert!(c.pass(), "{} {}: descent {} worst ratio {worst}", c.family, c.algorithm, c.descent_violations);
        assert_eq!(c.report.rows.len(), 256);
    }
}

#[test]
fn epsilon_bounds_and_stop_points() {
    let cases = epsilon_suite(0.05, 256, Exec::Parallel).unwrap();
    assert_eq!(cases.len(), 12);
    for c in &cases {
        assert!(c.pass(), "{} {}: {:?}", c.family, c.algorithm, c.report.failures().collect::<Vec<_>>());
    }
    assert!(cases.iter().any(|c| c.trajectory.stopped_early()));
}

#[test]
fn qp_solver_matches_grid_oracle() {
    let cmp = qp_oracle_suite(30, 201, 7, Exec::Parallel).unwrap();
    for c in &cmp {
        assert!(c.solver >= c.oracle - 1e-6, "{c:?}");
        assert!((c.solver - c.planted).abs() <= 1e-8 * c.planted.abs().max(1.0), "{c:?}");
        assert!(c.solver - c.oracle <= 1e-3, "{c:?}");
    }
}

#[test]
fn average_minimizer_is_a_common_minimizer() {
    for seed in 0..20 {
        let r = average_minimizer(seed, 1e-8, 1_000_000).unwrap();
        assert!(r.grad_norm <= 1e-8, "{r:?}");
        assert!(r.max_gap <= 1e-6, "{r:?}");
    }
}

#[test]
fn gradients_match_finite_differences() {
    for r in gradient_suite(5, 3, Exec::Parallel).unwrap() {
        assert!(r.worst_relative_error <= 1e-4, "{r:?}");
        assert_eq!(r.smoothness_violations, 0, "{r:?}");
    }
}

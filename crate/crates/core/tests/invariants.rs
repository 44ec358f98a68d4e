use std::sync::Arc;

use amoo_core::analysis::*;
use amoo_core::optimizers::{self, Algorithm, RunConfig};
use amoo_core::problems::*;
use amoo_core::suites::{lipschitz_families, smooth_families};
use amoo_core::*;
use proptest::prelude::*;

fn abs_coords(n: usize) -> ObjectiveSet {
    let objs = (0..n)
        .map(|i| {
            Arc::new(FnObjective::new(n, 0.0, move |x: &[f64]| x[i].abs(), move |x: &[f64]| {
                let mut g = vec![0.0; x.len()];
                g[i] = x[i].signum() * (x[i] != 0.0) as i32 as f64;
                g
            })) as Arc<dyn Objective>
        })
        .collect();
    ObjectiveSet::new(objs).unwrap()
}

fn psd(m: usize, entries: &[f64]) -> Gram {
    let n = m + 1;
    let a: Vec<&[f64]> = entries.chunks(n).take(m).collect();
    Gram::from_rows(
        (0..m).map(|i| (0..m).map(|j| a[i].iter().zip(a[j]).map(|(x, y)| x * y).sum()).collect()).collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn epsilon_membership_is_max_gap_threshold(x in prop::collection::vec(-2.0..2.0f64, 4), eps in 0.0..2.0f64) {
        let set = abs_coords(4);
        let p = Point::new(x).unwrap();
        prop_assert_eq!(is_in_epsilon_set(&set, &p, eps).unwrap(), max_gap(&set, &p).unwrap() <= eps);
    }

    #[test]
    fn selected_index_attains_max_gap(x in prop::collection::vec(-2.0..2.0f64, 5)) {
        let set = abs_coords(5);
        let p = Point::new(x).unwrap();
        let i = select_max_gap_index(&set, &p).unwrap();
        let gap = set.objective(i).value(p.as_slice()) - set.objective(i).optimal_value();
        prop_assert!((gap - max_gap(&set, &p).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn permuting_objectives_permutes_selection(x in prop::collection::vec(-2.0..2.0f64, 4), rot in 0usize..4) {
        let set = abs_coords(4);
        let order: Vec<usize> = (0..4).map(|j| (j + rot) % 4).collect();
        let permuted = set.select(&order).unwrap();
        let p = Point::new(x).unwrap();
        prop_assert_eq!(max_gap(&set, &p).unwrap(), max_gap(&permuted, &p).unwrap());
        let i = select_max_gap_index(&set, &p).unwrap();
        let j = select_max_gap_index(&permuted, &p).unwrap();
        prop_assert_eq!(set.gaps(p.as_slice()).unwrap()[i], permuted.gaps(p.as_slice()).unwrap()[j]);
    }

    #[test]
    fn tagged_constants_hold(seed in 0u64..1000, x in prop::collection::vec(-3.0..3.0f64, 10)) {
        let families = lipschitz_families().unwrap().into_iter().chain(smooth_families().unwrap());
        for fam in families {
            let n = fam.set.dim();
            let mut y = x.clone();
            y.resize(n, seed as f64 * 1e-3);
            for o in fam.set.objectives() {
                let g = o.gradient(&y);
                let g2: f64 = g.iter().map(|v| v * v).sum();
                if let Some(l) = o.lipschitz_bound() {
                    prop_assert!(g2.sqrt() <= l * (1.0 + 1e-12), "{}: |g| {} > {}", fam.label, g2.sqrt(), l);
                }
                if let Some(beta) = o.smoothness_bound() {
                    let gap = o.value(&y) - o.optimal_value();
                    prop_assert!(g2 <= 2.0 * beta * gap * (1.0 + 1e-12) + 1e-15, "{}", fam.label);
                }
            }
        }
    }

    #[test]
    fn power_quadratic_losses_are_nonnegative(d in prop::collection::vec(-2.0..2.0f64, 4), seed in 0u64..50) {
        for cfg in [
            PowerQuadraticConfig::p1(4),
            PowerQuadraticConfig::p2(4),
            PowerQuadraticConfig::p3(4, IllConditioning::for_output_dim(4), seed),
        ] {
            let shifts = cfg.shifts.clone();
            let set = make_power_quadratic_problem(cfg).unwrap();
            prop_assert!(set.values(&d).unwrap().iter().all(|v| *v >= 0.0));
            for (i, s) in shifts.iter().enumerate() {
                prop_assert_eq!(set.objective(i).value(&[*s; 4]), 0.0);
            }
        }
    }

    #[test]
    fn qp_solution_dominates_every_scaled_one_hot(
        m in 1usize..=3,
        entries in prop::collection::vec(-1.0..1.0f64, 12),
        delta in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let gram = psd(m, &entries);
        let p = WeightSubproblem::new(delta[..m].to_vec(), gram.clone()).unwrap();
        let sol = solve_nonneg_qp(&p, 1e-12, 100_000).unwrap();
        prop_assert!(sol.weights.as_slice().iter().all(|w| *w >= 0.0));
        for i in 0..m {
            if gram.get(i, i) > 1e-6 && delta[i] > 0.0 {
                let one_hot = delta[i] * delta[i] / gram.get(i, i);
                prop_assert!(sol.objective >= one_hot - 1e-9 * one_hot.max(1.0), "{} < {}", sol.objective, one_hot);
            }
        }
    }

    #[test]
    fn qp_rescales_with_gradients(
        m in 1usize..=3,
        entries in prop::collection::vec(-1.0..1.0f64, 12),
        delta in prop::collection::vec(0.0..1.0f64, 3),
        c in 0.5..4.0f64,
    ) {
        // Gradients times c: gram times c^2, weights and value divided by c^2.
        let gram = psd(m, &entries);
        let solve = |g: Gram| solve_nonneg_qp(&WeightSubproblem::new(delta[..m].to_vec(), g)?, 1e-13, 200_000);
        let (Ok(base), Ok(scaled)) = (solve(gram.clone()), solve(gram.scaled(c * c))) else {
            return Err(TestCaseError::reject("unbounded"));
        };
        prop_assume!(base.converged && scaled.converged);
        let tol = 1e-6 * base.objective.max(1.0);
        prop_assert!((base.objective - c * c * scaled.objective).abs() <= tol);
    }

    #[test]
    fn qp_oracle_never_beats_solver(
        entries in prop::collection::vec(-1.0..1.0f64, 6),
        delta in prop::collection::vec(0.0..1.0f64, 2),
    ) {
        let p = WeightSubproblem::new(delta, psd(2, &entries)).unwrap();
        let sol = solve_nonneg_qp(&p, 1e-10, 10_000).unwrap();
        let (_, oracle) = brute_force_qp_oracle(&p, 2.0, 101).unwrap();
        prop_assert!(oracle <= sol.objective + 1e-6);
    }
}

#[test]
fn geometric_sum_inequality_on_grid() {
    for m in 2..=128 {
        for k in 1..=128 {
            assert!(geometric_sum_holds(m, k), "m={m} K={k}");
        }
    }
}

#[test]
fn bound_formulas_are_monotone() {
    for k in 1..200 {
        assert!(pamoo_upper_bound(1.3, 2.0, k + 1) < pamoo_upper_bound(1.3, 2.0, k));
        assert!(mgamoo_lipschitz_bound(1.3, 2.0, k + 1) < mgamoo_lipschitz_bound(1.3, 2.0, k));
        assert!(smooth_bound(0.7, 2.0, k + 1) < smooth_bound(0.7, 2.0, k));
        let lb = |m, k| ew_lower_bound_value(m, 1.0, 2.0, k).unwrap().value;
        assert!(lb(16, k + 1) < lb(16, k));
        assert!(lb(17, k) > lb(16, k));
    }
}

#[test]
fn reduction_and_regret_hold_on_recorded_runs() {
    for fam in lipschitz_families().unwrap() {
        let g = fam.set.lipschitz_bound().unwrap();
        let x_star = fam.set.witness(&fam.x1).unwrap();
        let d = fam.x1.distance(&x_star);
        for alg in [Algorithm::Pamoo, Algorithm::MgamooPolyak, Algorithm::MgamooOgd, Algorithm::EwPolyak] {
            let traj = optimizers::run(&fam.set, &fam.x1, &RunConfig::new(alg, 128)).unwrap();
            assert!(reduction_violations(&traj, &fam.set).unwrap().is_empty(), "{} {alg}", fam.label);
            if alg == Algorithm::MgamooOgd {
                let regret = selected_regret(&traj, &fam.set, &x_star).unwrap();
                assert!(regret <= 1.5 * g * d * (traj.len() as f64).sqrt() * (1.0 + 1e-9), "{}", fam.label);
            }
        }
    }
}

#[test]
fn mgamoo_weights_are_one_hot_without_momentum() {
    let fam = &lipschitz_families().unwrap()[1];
    let traj = optimizers::run(&fam.set, &fam.x1, &RunConfig::new(Algorithm::MgamooPolyak, 50)).unwrap();
    for (w, sel) in traj.weights.iter().zip(&traj.selected) {
        let i = sel.unwrap();
        assert_eq!(w, &WeightVector::one_hot(fam.set.len(), i));
    }
    let traj = optimizers::run(&fam.set, &fam.x1, &RunConfig::new(Algorithm::MgamooPolyak, 50).with_momentum(0.9)).unwrap();
    for w in &traj.weights {
        assert!((w.sum() - 1.0).abs() < 1e-12);
        assert!(w.as_slice().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn separation_on_lower_bound_instance() {
    let s = separation_experiment(64, 32).unwrap();
    assert!(s.separated, "{s:?}");
    assert!(s.ew_mg >= 2.6 * s.dist / 32f64.sqrt());
    assert!(s.mgamoo_mg <= 1.5 * s.dist / 32f64.sqrt());
}

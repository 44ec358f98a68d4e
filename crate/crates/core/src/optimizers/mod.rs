//! Equal-weight baselines, PAMOO and MG-AMOO.

mod config;
mod momentum;
pub mod rules;
pub mod soo;

pub use config::{Algorithm, RunConfig};
pub use momentum::apply_momentum;
pub use rules::{EqualWeights, MaxGap, Pamoo, StepPlan, WeightingRule};
pub use soo::{Gd, Ogd, Polyak, SooStep};

use crate::error::{AmooError, Result};
use crate::objective::{ObjectiveSet, EVAL_TOLERANCE};
use crate::parallel::Exec;
use crate::point::Point;
use crate::trajectory::Trajectory;

/// Runs are aborted once `MG(x_k)` exceeds this multiple of `MG(x_1)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Run `cfg.iterations` steps of `rule` from `x1`.
pub fn drive(
    set: &ObjectiveSet,
    x1: &Point,
    iterations: usize,
    learning_rate: f64,
    rule: &mut dyn WeightingRule,
    detect_divergence: bool,
) -> Result<Trajectory> {
    set.check_dim(x1.as_slice())?;
    let mut traj = Trajectory {
        iterates: Vec::with_capacity(iterations),
        weights: Vec::with_capacity(iterations),
        per_step_max_gap: Vec::with_capacity(iterations),
        step_sizes: Vec::with_capacity(iterations),
        selected: Vec::with_capacity(iterations),
        stopped_at: None,
        last: x1.clone(),
        diagnostics: vec![],
    };
    let mut x = x1.clone();
    let mut limit = f64::INFINITY;
    for k in 1..=iterations {
        let plan = rule.plan(set, &x, k)?;
        if detect_divergence {
            if k == 1 {
                limit = DIVERGENCE_FACTOR * plan.max_gap.max(0.0);
            } else if plan.max_gap > limit && plan.max_gap > EVAL_TOLERANCE {
                return Err(AmooError::Divergence { step: k, max_gap: plan.max_gap, limit });
            }
        }
        traj.per_step_max_gap.push(plan.max_gap);
        traj.weights.push(plan.weights);
        traj.step_sizes.push(plan.step_size * learning_rate);
        traj.selected.push(plan.selected);
        traj.diagnostics.extend(plan.diagnostics);
        if plan.stop {
            traj.iterates.push(x.clone());
            traj.stopped_at = Some(k);
            traj.last = x;
            return Ok(traj);
        }
        let next = x.step(plan.step_size * learning_rate, &plan.direction)?;
        traj.iterates.push(std::mem::replace(&mut x, next));
    }
    traj.last = x;
    Ok(traj)
}

fn expect_algorithm(cfg: &RunConfig, allowed: &[Algorithm]) -> Result<()> {
    cfg.validate()?;
    if allowed.contains(&cfg.algorithm) {
        Ok(())
    } else {
        Err(AmooError::Usage(format!("{} cannot be run by this entry point", cfg.algorithm)))
    }
}

fn gd_step(set: &ObjectiveSet, cfg: &RunConfig) -> Result<f64> {
    match (cfg.gd_step, set.smoothness_bound()) {
        (Some(s), _) => Ok(s),
        (None, Some(beta)) => Ok(1.0 / (2.0 * beta)),
        (None, None) => Err(AmooError::Config("gd_step is required for non-smooth objectives".into())),
    }
}

fn ew_optimum(set: &ObjectiveSet, cfg: &RunConfig) -> Result<f64> {
    match cfg.ew_optimal_value {
        Some(v) => Ok(v),
        None if cfg.epsilon == 0.0 => Ok(set.optimal_values().iter().sum::<f64>() / set.len() as f64),
        None => Err(AmooError::Config("approximate alignment needs ew_optimal_value".into())),
    }
}

/// The weighting rule `cfg` describes, with MG-AMOO using its default optimizer.
pub fn make_rule(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig, exec: Exec) -> Result<Box<dyn WeightingRule>> {
    cfg.validate()?;
    Ok(match cfg.algorithm {
        Algorithm::EwPolyak => {
            Box::new(EqualWeights { polyak_optimum: Some(ew_optimum(set, cfg)?), constant_step: 0.0 })
        }
        Algorithm::EwGd => Box::new(EqualWeights { polyak_optimum: None, constant_step: gd_step(set, cfg)? }),
        Algorithm::Pamoo => Box::new(Pamoo { epsilon: cfg.epsilon, stop_on_epsilon: cfg.stop_on_epsilon, exec }),
        _ => Box::new(MaxGap::new(default_soo(set, x1, cfg)?, cfg.epsilon, cfg.stop_on_epsilon, cfg.momentum)),
    })
}

/// Polyak, `Gd { 1/(2 beta) }` or `Ogd { D = |x1 - witness|, G }` as `cfg` asks.
pub fn default_soo(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig) -> Result<Box<dyn SooStep>> {
    Ok(match cfg.algorithm {
        Algorithm::MgamooPolyak => Box::new(Polyak),
        Algorithm::MgamooGd => Box::new(Gd { step: gd_step(set, cfg)? }),
        Algorithm::MgamooOgd => {
            let g = set
                .lipschitz_bound()
                .ok_or_else(|| AmooError::Config("OGD needs a Lipschitz bound".into()))?;
            let d = match cfg.ogd_distance {
                Some(d) => d,
                None => {
                    let w = set.witness(x1).ok_or_else(|| {
                        AmooError::Config("OGD needs ogd_distance when no solution witness is known".into())
                    })?;
                    x1.distance(&w)
                }
            };
            if d == 0.0 {
                // already optimal; any schedule leaves x fixed
                Box::new(Gd { step: 0.0 })
            } else {
                Box::new(Ogd::new(d, g)?)
            }
        }
        other => return Err(AmooError::Usage(format!("{other} has no single-objective optimizer"))),
    })
}

/// `x_{k+1} = x_k - eta_k grad f_EW(x_k)` with the Polyak step on f_EW.
pub fn ew_polyak_run(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig) -> Result<Trajectory> {
    expect_algorithm(cfg, &[Algorithm::EwPolyak])?;
    let mut rule = make_rule(set, x1, cfg, Exec::default())?;
    drive(set, x1, cfg.iterations, cfg.learning_rate, rule.as_mut(), false)
}

/// Constant-step descent on f_EW, aborting on divergence.
pub fn ew_gd_run(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig) -> Result<Trajectory> {
    expect_algorithm(cfg, &[Algorithm::EwGd])?;
    let mut rule = make_rule(set, x1, cfg, Exec::default())?;
    drive(set, x1, cfg.iterations, cfg.learning_rate, rule.as_mut(), true)
}

pub fn pamoo_run(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig) -> Result<Trajectory> {
    pamoo_run_with(set, x1, cfg, Exec::default())
}

pub fn pamoo_run_with(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig, exec: Exec) -> Result<Trajectory> {
    expect_algorithm(cfg, &[Algorithm::Pamoo])?;
    let mut rule = make_rule(set, x1, cfg, exec)?;
    drive(set, x1, cfg.iterations, cfg.learning_rate, rule.as_mut(), false)
}

pub fn mgamoo_run(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig, soo: Box<dyn SooStep>) -> Result<Trajectory> {
    expect_algorithm(cfg, &[Algorithm::MgamooPolyak, Algorithm::MgamooGd, Algorithm::MgamooOgd])?;
    let mut rule = MaxGap::new(soo, cfg.epsilon, cfg.stop_on_epsilon, cfg.momentum);
    let divergence = cfg.algorithm == Algorithm::MgamooGd;
    drive(set, x1, cfg.iterations, cfg.learning_rate, &mut rule, divergence)
}

/// Dispatch on `cfg.algorithm` with default settings.
pub fn run(set: &ObjectiveSet, x1: &Point, cfg: &RunConfig) -> Result<Trajectory> {
    match cfg.algorithm {
        Algorithm::EwPolyak => ew_polyak_run(set, x1, cfg),
        Algorithm::EwGd => ew_gd_run(set, x1, cfg),
        Algorithm::Pamoo => pamoo_run(set, x1, cfg),
        _ => mgamoo_run(set, x1, cfg, default_soo(set, x1, cfg)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{FnObjective, Objective};
    use crate::problems::{make_lower_bound_problem, QuadraticFamily};
    use std::sync::Arc;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn single(f: FnObjective) -> ObjectiveSet {
        ObjectiveSet::new(vec![Arc::new(f) as Arc<dyn Objective>]).unwrap()
    }

    fn abs1() -> ObjectiveSet {
        single(FnObjective::new(1, 0.0, |x| x[0].abs(), |x| vec![crate::linalg::sign(x[0])]).with_lipschitz(1.0))
    }

    fn half_sq(beta: f64) -> ObjectiveSet {
        single(
            FnObjective::new(1, 0.0, move |x| 0.5 * beta * x[0] * x[0], move |x| vec![beta * x[0]])
                .with_smoothness(beta),
        )
    }

    #[test]
    fn ew_polyak_first_step_on_lower_bound() {
        let (set, _) = make_lower_bound_problem(4, 4, 1.0).unwrap();
        let t = ew_polyak_run(&set, &p(&[3.0, 1.0, 1.0, 1.0]), &RunConfig::new(Algorithm::EwPolyak, 2)).unwrap();
        assert_eq!(t.iterates[1].as_slice(), &[1.5, -0.5, -0.5, -0.5]);
    }

    #[test]
    fn ew_polyak_on_abs_and_at_optimum() {
        let t = ew_polyak_run(&abs1(), &p(&[2.0]), &RunConfig::new(Algorithm::EwPolyak, 1)).unwrap();
        assert_eq!(t.last.as_slice(), &[0.0]);
        let (set, _) = make_lower_bound_problem(3, 4, 0.5).unwrap();
        let t = ew_polyak_run(&set, &p(&[0.0, 0.0, 0.0, 7.0]), &RunConfig::new(Algorithm::EwPolyak, 5)).unwrap();
        assert!(t.iterates.iter().all(|x| x.as_slice() == [0.0, 0.0, 0.0, 7.0]));
    }

    #[test]
    fn pamoo_single_objective_is_polyak() {
        let t = pamoo_run(&half_sq(1.0), &p(&[1.0]), &RunConfig::new(Algorithm::Pamoo, 1)).unwrap();
        assert!((t.weights[0].as_slice()[0] - 0.5).abs() < 1e-12);
        assert!((t.last.coord(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pamoo_decreases_distance_on_separable_quadratics() {
        let set = QuadraticFamily::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap().objective_set();
        let t = pamoo_run(&set, &p(&[1.0, 1.0]), &RunConfig::new(Algorithm::Pamoo, 5)).unwrap();
        for k in 0..4 {
            let (a, b) = (&t.iterates[k], &t.iterates[k + 1]);
            let gaps = set.gaps(a.as_slice()).unwrap();
            let i = crate::metric::argmax_lowest(&gaps);
            let g = crate::linalg::norm_sq(&set.gradient(i, a.as_slice()).unwrap());
            let lhs = crate::linalg::norm_sq(b.as_slice());
            let rhs = crate::linalg::norm_sq(a.as_slice()) - gaps[i] * gaps[i] / g;
            assert!(lhs <= rhs + 1e-9, "step {k}: {lhs} > {rhs}");
            assert!(lhs < crate::linalg::norm_sq(a.as_slice()));
        }
    }

    #[test]
    fn zero_gaps_give_zero_weights() {
        let set = QuadraticFamily::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap().objective_set();
        let t = pamoo_run(&set, &p(&[0.0, 0.0]), &RunConfig::new(Algorithm::Pamoo, 3)).unwrap();
        assert!(t.weights.iter().all(|w| w.is_zero()));
        assert!(t.iterates.iter().all(|x| x.as_slice() == [0.0, 0.0]));
    }

    #[test]
    fn mgamoo_variants_step_as_expected() {
        let t = run(&half_sq(2.0), &p(&[1.0]), &RunConfig::new(Algorithm::MgamooGd, 1)).unwrap();
        assert!((t.last.coord(0) - 0.5).abs() < 1e-15);
        let t = run(&abs1(), &p(&[0.3]), &RunConfig::new(Algorithm::MgamooPolyak, 1)).unwrap();
        assert_eq!(t.step_sizes[0], 0.3);
        assert_eq!(t.selected[0], Some(0));
        let cfg = RunConfig::new(Algorithm::MgamooPolyak, 1).with_epsilon(0.1, false);
        let t = run(&abs1(), &p(&[0.3]), &cfg).unwrap();
        assert!((t.step_sizes[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn single_objective_algorithms_coincide() {
        let set = half_sq(1.5);
        let x1 = p(&[2.0]);
        let a = run(&set, &x1, &RunConfig::new(Algorithm::EwPolyak, 20)).unwrap();
        let b = run(&set, &x1, &RunConfig::new(Algorithm::Pamoo, 20)).unwrap();
        let c = run(&set, &x1, &RunConfig::new(Algorithm::MgamooPolyak, 20)).unwrap();
        for k in 0..20 {
            assert!((a.iterates[k].coord(0) - b.iterates[k].coord(0)).abs() <= 1e-12);
            assert!((a.iterates[k].coord(0) - c.iterates[k].coord(0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn stop_rule_returns_current_iterate() {
        let cfg = RunConfig::new(Algorithm::MgamooPolyak, 10).with_epsilon(0.5, true);
        // the epsilon step lands exactly on gap = eps, which does not trigger the strict test
        let t = run(&abs1(), &p(&[2.0]), &cfg).unwrap();
        assert_eq!(t.stopped_at, None);
        assert_eq!(t.last.as_slice(), &[0.5]);
        let t = run(&abs1(), &p(&[0.3]), &cfg).unwrap();
        assert_eq!(t.stopped_at, Some(1));
        assert_eq!(t.len(), 1);
        assert_eq!(t.last.as_slice(), &[0.3]);
        assert!(crate::metric::is_in_epsilon_set(&abs1(), &t.last, 0.5).unwrap());
    }

    #[test]
    fn ew_gd_examples() {
        let set = half_sq(1.0);
        let t = run(&set, &p(&[1.0]), &RunConfig::new(Algorithm::EwGd, 1).with_gd_step(0.5)).unwrap();
        assert_eq!(t.last.as_slice(), &[0.5]);
        let t = run(&set, &p(&[1.0]), &RunConfig::new(Algorithm::EwGd, 4).with_gd_step(0.0)).unwrap();
        assert!(t.iterates.iter().all(|x| x.as_slice() == [1.0]));
        let fam = QuadraticFamily::random_aligned(3, 6, 2, 9).unwrap();
        let set = fam.objective_set();
        let t = run(&set, &p(&[1.0; 6]), &RunConfig::new(Algorithm::EwGd, 100)).unwrap();
        assert!(t.per_step_max_gap.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ew_gd_detects_divergence() {
        let t = run(&half_sq(1.0), &p(&[1.0]), &RunConfig::new(Algorithm::EwGd, 100).with_gd_step(3.0));
        assert!(matches!(t, Err(AmooError::Divergence { .. })));
    }

    #[test]
    fn momentum_starts_from_first_selection() {
        let (set, x1) = make_lower_bound_problem(4, 4, 0.1).unwrap();
        let t = run(&set, &x1, &RunConfig::new(Algorithm::MgamooPolyak, 3).with_momentum(0.95)).unwrap();
        assert_eq!(t.weights[0].as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        for w in &t.weights {
            assert!((w.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_entry_point_is_usage_error() {
        let cfg = RunConfig::new(Algorithm::Pamoo, 1);
        assert!(matches!(ew_polyak_run(&abs1(), &p(&[1.0]), &cfg), Err(AmooError::Usage(_))));
    }
}

//! Canonical check suites with fixed seeds, shared by the `amoo reproduce`
//! commands and the acceptance tests.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_run_against_bounds, descent_violations, Bound, BoundConstants, BoundReport, KGrid,
};
use crate::error::{AmooError, Result};
use crate::linalg::norm_sq;
use crate::metric::{is_in_epsilon_set, max_gap};
use crate::objective::ObjectiveSet;
use crate::optimizers::{self, Algorithm, RunConfig};
use crate::parallel::{map_items, Exec};
use crate::point::Point;
use crate::problems::{
    gradient_check, make_distillation_problem, make_power_quadratic_problem, DistillationConfig, IllConditioning,
    LowerBoundProblem, PerturbedNormFamily, PiecewiseLinearFamily, PowerQuadraticConfig, QuadraticFamily, FD_STEP,
};
use crate::rng;
use crate::trajectory::Trajectory;
use crate::weights_qp::{brute_force_qp_oracle, solve_nonneg_qp, Gram, WeightSubproblem, DEFAULT_MAX_ITERS, DEFAULT_TOL};

/// A named objective set with its start point.
#[derive(Clone)]
pub struct Family {
    pub label: String,
    pub set: ObjectiveSet,
    pub x1: Point,
}

/// The lower-bound instance with `m` objectives in `R^m`, eps = 0.1.
pub fn lower_bound_family(m: usize) -> Result<Family> {
    let p = LowerBoundProblem::new(m, m, 0.1)?;
    Ok(Family { label: format!("lower_bound_m{m}"), set: p.objective_set(), x1: p.start() })
}

/// Lipschitz families: the lower-bound instance (m=16) and three draws of
/// the 3-objective piecewise-linear family in R^10.
pub fn lipschitz_families() -> Result<Vec<Family>> {
    let mut out = vec![lower_bound_family(16)?];
    for seed in 0..3 {
        let fam = PiecewiseLinearFamily::random(10, seed)?;
        out.push(Family { label: format!("piecewise_s{seed}"), set: fam.objective_set(), x1: Point::zeros(10) });
    }
    Ok(out)
}

/// Aligned diagonal quadratics (m=3, n=10, 2 flat coordinates), start at all ones.
pub fn smooth_families() -> Result<Vec<Family>> {
    (0..3)
        .map(|seed| {
            let fam = QuadraticFamily::random_aligned(3, 10, 2, seed)?;
            Ok(Family {
                label: format!("quadratic_s{seed}"),
                set: fam.objective_set(),
                x1: Point::new(vec![1.0; 10])?,
            })
        })
        .collect()
}

/// Distances to centers within 0.05 of a common point (m=3, n=5).
pub fn epsilon_families(eps: f64) -> Result<Vec<Family>> {
    (0..3)
        .map(|seed| {
            let fam = PerturbedNormFamily::random(3, 5, eps, seed)?;
            Ok(Family { label: format!("perturbed_s{seed}"), set: fam.objective_set(), x1: Point::new(vec![2.0; 5])? })
        })
        .collect()
}

/// Lower-bound closed form and inequality for equal-weight Polyak.
#[derive(Debug, Clone)]
pub struct LowerBoundSuite {
    pub trajectory: Trajectory,
    /// Largest `|x_k - closed_form(k)|` over all coordinates and k.
    pub max_abs_error: f64,
    pub inequality: BoundReport,
}

pub fn lower_bound_suite(m: usize, iterations: usize, ks: &[usize]) -> Result<LowerBoundSuite> {
    let p = LowerBoundProblem::new(m, m, 0.1)?;
    let set = p.objective_set();
    let trajectory = optimizers::run(&set, &p.start(), &RunConfig::new(Algorithm::EwPolyak, iterations))?;
    let mut max_abs_error: f64 = 0.0;
    for (k, x) in trajectory.iterates.iter().enumerate() {
        let expected = p.closed_form_iterate(k + 1);
        for (a, b) in x.as_slice().iter().zip(expected.as_slice()) {
            max_abs_error = max_abs_error.max((a - b).abs());
        }
    }
    let c = BoundConstants::new(Bound::EwLower { lipschitz: 1.0, m }).with_grid(KGrid::Explicit(ks.to_vec()));
    let inequality = check_run_against_bounds(&trajectory, &set, &c)?;
    Ok(LowerBoundSuite { trajectory, max_abs_error, inequality })
}

/// One algorithm on one family, checked against its upper bound.
#[derive(Debug, Clone)]
pub struct BoundCase {
    pub family: String,
    pub algorithm: Algorithm,
    pub stop_on_epsilon: bool,
    pub trajectory: Trajectory,
    pub report: BoundReport,
    /// Steps violating the per-step distance decrease (PAMOO and MG-AMOO Polyak only).
    pub descent_violations: usize,
    /// Whether the stopped iterate, if any, lies in `C_eps`.
    pub stop_point_ok: bool,
}

impl BoundCase {
    pub fn pass(&self) -> bool {
        self.report.all_pass() && self.descent_violations == 0 && self.stop_point_ok
    }
}

fn has_descent_invariant(alg: Algorithm) -> bool {
    matches!(alg, Algorithm::Pamoo | Algorithm::MgamooPolyak)
}

fn bound_case(family: &Family, cfg: &RunConfig, bound: Bound) -> Result<BoundCase> {
    let trajectory = optimizers::run(&family.set, &family.x1, cfg)?;
    let eps = cfg.epsilon;
    let c = BoundConstants::new(bound).with_epsilon(eps).with_grid(KGrid::All);
    let report = check_run_against_bounds(&trajectory, &family.set, &c)?;
    let descent = if has_descent_invariant(cfg.algorithm) {
        let x_star = family
            .set
            .witness(&family.x1)
            .ok_or_else(|| AmooError::Config(format!("{} has no solution witness", family.label)))?;
        descent_violations(&trajectory, &family.set, &x_star, eps)?.len()
    } else {
        0
    };
    let stop_point_ok = match trajectory.stopped_at {
        Some(_) => is_in_epsilon_set(&family.set, &trajectory.last, eps)?,
        None => true,
    };
    Ok(BoundCase {
        family: family.label.clone(),
        algorithm: cfg.algorithm,
        stop_on_epsilon: cfg.stop_on_epsilon,
        trajectory,
        report,
        descent_violations: descent,
        stop_point_ok,
    })
}

/// PAMOO, MG-AMOO Polyak and MG-AMOO OGD on the Lipschitz families, and
/// MG-AMOO GD (step 1/(2 beta)) on the smooth ones, `iterations` steps each.
pub fn bound_suite(iterations: usize, exec: Exec) -> Result<Vec<BoundCase>> {
    let mut jobs = vec![];
    for fam in lipschitz_families()? {
        for alg in [Algorithm::Pamoo, Algorithm::MgamooPolyak, Algorithm::MgamooOgd] {
            jobs.push((fam.clone(), RunConfig::new(alg, iterations)));
        }
    }
    for fam in smooth_families()? {
        jobs.push((fam, RunConfig::new(Algorithm::MgamooGd, iterations)));
    }
    run_cases(&jobs, exec)
}

/// epsilon-PAMOO and epsilon-MG-AMOO Polyak on the perturbed families, once
/// running all `iterations` steps and once with the stopping rule.
pub fn epsilon_suite(eps: f64, iterations: usize, exec: Exec) -> Result<Vec<BoundCase>> {
    let mut jobs = vec![];
    for fam in epsilon_families(eps)? {
        for alg in [Algorithm::Pamoo, Algorithm::MgamooPolyak] {
            for stop in [false, true] {
                jobs.push((fam.clone(), RunConfig::new(alg, iterations).with_epsilon(eps, stop)));
            }
        }
    }
    run_cases(&jobs, exec)
}

fn run_cases(jobs: &[(Family, RunConfig)], exec: Exec) -> Result<Vec<BoundCase>> {
    map_items(exec, jobs, |(fam, cfg)| {
        let bound = Bound::for_algorithm(cfg.algorithm, &fam.set)?;
        bound_case(fam, cfg, bound)
    })
    .into_iter()
    .collect()
}

/// Solver against the grid oracle on one random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpComparison {
    pub m: usize,
    pub solver: f64,
    pub oracle: f64,
    /// Objective at the planted optimum.
    pub planted: f64,
}

impl QpComparison {
    pub fn pass(&self, tol: f64) -> bool {
        (self.solver - self.oracle).abs() <= tol && self.solver >= self.oracle - 1e-6
    }
}

/// Random instance with a known optimum: pick `w0 >= 0`, then set
/// `delta = G w0 - s` with `s >= 0` off the support of `w0` and zero on it.
pub fn planted_subproblem(m: usize, r: &mut rng::Rng) -> Result<(WeightSubproblem, Vec<f64>)> {
    let n = m + 1;
    let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let rows = (0..m)
        .map(|i| (0..m).map(|j| a[i].iter().zip(&a[j]).map(|(x, y)| x * y).sum::<f64>() / n as f64).collect())
        .collect();
    let gram = Gram::from_rows(rows)?;
    let w0: Vec<f64> = (0..m).map(|_| if r.gen_bool(0.7) { r.gen_range(0.05..0.95) } else { 0.0 }).collect();
    let delta = (0..m)
        .map(|i| {
            let gw: f64 = (0..m).map(|j| gram.get(i, j) * w0[j]).sum();
            if w0[i] > 0.0 {
                gw
            } else {
                gw - r.gen_range(0.0..0.5)
            }
        })
        .collect();
    Ok((WeightSubproblem::new(delta, gram)?, w0))
}

/// `count` planted instances with m cycling through 1, 2, 3, compared with
/// the grid oracle on `[0, 1]^m` with `grid_steps` points per axis.
pub fn qp_oracle_suite(count: usize, grid_steps: usize, seed: u64, exec: Exec) -> Result<Vec<QpComparison>> {
    let mut r = rng::stream(seed, rng::streams::FAMILY);
    let instances = (0..count).map(|c| planted_subproblem(1 + c % 3, &mut r)).collect::<Result<Vec<_>>>()?;
    map_items(exec, &instances, |(p, w0)| {
        let sol = solve_nonneg_qp(p, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
        let (_, oracle) = brute_force_qp_oracle(p, 1.0, grid_steps)?;
        Ok(QpComparison { m: p.dim(), solver: sol.objective, oracle, planted: p.objective(w0) })
    })
    .into_iter()
    .collect()
}

/// Minimizing the equal-weight average by gradient descent on an aligned
/// quadratic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageMinimizer {
    pub seed: u64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub max_gap: f64,
}

/// GD with step `1/beta_avg` on `f_EW` until `|grad f_EW| <= tol`.
pub fn average_minimizer(seed: u64, tol: f64, max_iters: usize) -> Result<AverageMinimizer> {
    let fam = QuadraticFamily::random_aligned(3, 8, 2, seed)?;
    let set = fam.objective_set();
    let m = set.len() as f64;
    let beta: f64 = (0..fam.dim())
        .map(|j| fam.diagonals.iter().map(|d| d[j]).sum::<f64>() / m)
        .fold(0.0, f64::max);
    let w = vec![1.0 / m; set.len()];
    let mut x = Point::new(vec![1.0; fam.dim()])?;
    let mut iterations = 0;
    loop {
        let g = set.weighted_gradient(x.as_slice(), &w)?;
        let grad_norm = norm_sq(&g).sqrt();
        if grad_norm <= tol || iterations == max_iters {
            return Ok(AverageMinimizer { seed, grad_norm, iterations, max_gap: max_gap(&set, &x)? });
        }
        x = x.step(1.0 / beta, &g)?;
        iterations += 1;
    }
}

/// Distance-like margin from `x` to the nearest kink of a family.
pub type KinkMargin = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A family checked by finite differences and, when smooth, by
/// `|grad f|^2 <= 2 beta (f - f*)`.
#[derive(Clone)]
pub struct GradientCase {
    pub label: String,
    pub set: ObjectiveSet,
    pub margin: KinkMargin,
    /// Sampling box half-width.
    pub radius: f64,
}

fn smooth() -> KinkMargin {
    Arc::new(|_| f64::INFINITY)
}

fn sorted_abs(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut a: Vec<f64> = v.map(f64::abs).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

/// Every objective family, including the desk-scale distillation losses.
pub fn gradient_cases() -> Result<Vec<GradientCase>> {
    let lb_m = 8;
    let pw = PiecewiseLinearFamily::random(6, 1)?;
    let pw_margin = {
        let pw = pw.clone();
        Arc::new(move |x: &[f64]| {
            let shifted: Vec<f64> = x.iter().zip(&pw.center).map(|(v, c)| v - c).collect();
            let top = sorted_abs(shifted.iter().cloned());
            let l1 = top.last().cloned().unwrap_or(f64::INFINITY);
            let linf = if top.len() > 1 { top[0] - top[1] } else { f64::INFINITY };
            let lin = crate::linalg::dot(&pw.direction, &shifted).abs() / norm_sq(&pw.direction).sqrt();
            l1.min(linf).min(lin)
        }) as KinkMargin
    };
    let mut out = vec![
        GradientCase {
            label: "lower_bound".into(),
            set: lower_bound_family(lb_m)?.set,
            margin: Arc::new(move |x: &[f64]| sorted_abs(x[..lb_m].iter().cloned()).last().cloned().unwrap_or(0.0)),
            radius: 1.5,
        },
        GradientCase { label: "piecewise".into(), set: pw.objective_set(), margin: pw_margin, radius: 1.5 },
        GradientCase {
            label: "perturbed".into(),
            set: PerturbedNormFamily::random(3, 5, 0.05, 1)?.objective_set(),
            margin: smooth(),
            radius: 1.5,
        },
        GradientCase {
            label: "quadratic".into(),
            set: QuadraticFamily::random_aligned(3, 6, 1, 1)?.objective_set(),
            margin: smooth(),
            radius: 1.5,
        },
    ];
    for (name, cfg) in [
        ("identity_p1", PowerQuadraticConfig::p1(4)),
        ("identity_p2", PowerQuadraticConfig::p2(4)),
        ("identity_p3", PowerQuadraticConfig::p3(4, IllConditioning::for_output_dim(4), 1)),
    ] {
        out.push(GradientCase {
            label: name.into(),
            set: make_power_quadratic_problem(cfg)?,
            margin: smooth(),
            radius: 1.5,
        });
    }
    let problem = Arc::new(make_distillation_problem(DistillationConfig::desk(1))?);
    let batch = problem.config.batch_size;
    for (name, cfg) in [
        ("distill_p1", PowerQuadraticConfig::p1(4)),
        ("distill_p2", PowerQuadraticConfig::p2(4)),
        ("distill_p3", PowerQuadraticConfig::p3(4, IllConditioning::for_output_dim(4), 1)),
    ] {
        let p = problem.clone();
        out.push(GradientCase {
            label: name.into(),
            set: problem.batch_objectives(&cfg, 0, Exec::Sequential)?,
            margin: Arc::new(move |x: &[f64]| p.min_abs_preactivation(x, 0..batch)),
            radius: 0.5,
        });
    }
    Ok(out)
}

/// Minimum kink margin of accepted sample points.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientResult {
    pub label: String,
    pub points: usize,
    /// Largest finite-difference relative error over objectives and points.
    pub worst_relative_error: f64,
    /// Points where some beta-tagged objective breaks `|g|^2 <= 2 beta gap`.
    pub smoothness_violations: usize,
}

/// Checks `points` random kink-free points per family.
pub fn gradient_suite(points: usize, seed: u64, exec: Exec) -> Result<Vec<GradientResult>> {
    let cases = gradient_cases()?;
    map_items(exec, &cases, |case| {
        let mut r = rng::stream(seed, rng::streams::FAMILY);
        let n = case.set.dim();
        let mut worst: f64 = 0.0;
        let mut smoothness_violations = 0;
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < points {
            attempts += 1;
            if attempts > 1000 * points {
                return Err(AmooError::Numeric(format!("{}: no kink-free sample points", case.label)));
            }
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(-case.radius..case.radius)).collect();
            if (case.margin)(&x) < KINK_MARGIN {
                continue;
            }
            accepted += 1;
            let mut violated = false;
            for o in case.set.objectives() {
                worst = worst.max(gradient_check(o.as_ref(), &x, FD_STEP)?);
                if let Some(beta) = o.smoothness_bound() {
                    let gap = o.value(&x) - o.optimal_value();
                    let g2 = norm_sq(&o.gradient(&x));
                    violated |= g2 > 2.0 * beta * gap * (1.0 + 1e-12) + 1e-15;
                }
            }
            smoothness_violations += violated as usize;
        }
        Ok(GradientResult { label: case.label.clone(), points, worst_relative_error: worst, smoothness_violations })
    })
    .into_iter()
    .collect()
}

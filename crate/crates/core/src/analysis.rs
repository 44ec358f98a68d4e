//! Convergence bounds, bound-vs-run verdicts, trajectory invariants and
//! throughput measurement.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{AmooError, Result};
use crate::linalg::{dist_sq, norm_sq};
use crate::metric::argmax_lowest;
use crate::objective::ObjectiveSet;
use crate::optimizers::{self, Algorithm, RunConfig, WeightingRule};
use crate::parallel::Exec;
use crate::point::Point;
use crate::problems::{ew_lower_bound_value, LowerBoundProblem};
use crate::trajectory::{average_iterate, Trajectory};

/// Relative slack granted to every verdict.
pub const VERDICT_TOLERANCE: f64 = 1e-6;
/// Absolute slack for the per-step inequalities.
pub const INVARIANT_TOLERANCE: f64 = 1e-9;

/// `G dist / sqrt(K)`.
pub fn pamoo_upper_bound(g: f64, dist: f64, k: usize) -> f64 {
    g * dist / (k as f64).sqrt()
}

/// `1.5 G dist / sqrt(K)`.
pub fn mgamoo_lipschitz_bound(g: f64, dist: f64, k: usize) -> f64 {
    1.5 * g * dist / (k as f64).sqrt()
}

/// `2 beta dist^2 / K`.
pub fn smooth_bound(beta: f64, dist: f64, k: usize) -> f64 {
    2.0 * beta * dist * dist / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Upper,
    Lower,
}

/// A convergence rate for `MG(x̄_K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "snake_case")]
pub enum Bound {
    /// PAMOO on G-Lipschitz objectives, plus `eps`.
    Pamoo { lipschitz: f64 },
    /// MG-AMOO with Polyak or OGD steps on G-Lipschitz objectives, plus `eps`.
    MgamooLipschitz { lipschitz: f64 },
    /// Any of the three algorithms on beta-smooth objectives, plus `2 eps`.
    Smooth { beta: f64 },
    /// Equal-weight Polyak on the lower-bound instance with `m` objectives,
    /// checked only for `m/4 <= K <= m`.
    EwLower { lipschitz: f64, m: usize },
}

impl Bound {
    pub fn kind(&self) -> BoundKind {
        match self {
            Bound::EwLower { .. } => BoundKind::Lower,
            _ => BoundKind::Upper,
        }
    }

    pub fn value(&self, dist: f64, k: usize, eps: f64) -> Result<f64> {
        if k == 0 {
            return Err(AmooError::Usage("bounds are defined for K >= 1".into()));
        }
        Ok(match *self {
            Bound::Pamoo { lipschitz } => pamoo_upper_bound(lipschitz, dist, k) + eps,
            Bound::MgamooLipschitz { lipschitz } => mgamoo_lipschitz_bound(lipschitz, dist, k) + eps,
            Bound::Smooth { beta } => smooth_bound(beta, dist, k) + 2.0 * eps,
            Bound::EwLower { lipschitz, m } => ew_lower_bound_value(m, lipschitz, dist, k)?.value,
        })
    }

    /// The upper bound that applies to `algorithm` given the constants of `set`.
    pub fn for_algorithm(algorithm: Algorithm, set: &ObjectiveSet) -> Result<Bound> {
        let missing = |what: &str| AmooError::Config(format!("{algorithm} bound needs a {what} constant"));
        match algorithm {
            Algorithm::Pamoo => set
                .lipschitz_bound()
                .map(|g| Bound::Pamoo { lipschitz: g })
                .or_else(|| set.smoothness_bound().map(|beta| Bound::Smooth { beta }))
                .ok_or_else(|| missing("Lipschitz or smoothness")),
            Algorithm::MgamooPolyak | Algorithm::MgamooOgd => set
                .lipschitz_bound()
                .map(|g| Bound::MgamooLipschitz { lipschitz: g })
                .or_else(|| set.smoothness_bound().map(|beta| Bound::Smooth { beta }))
                .ok_or_else(|| missing("Lipschitz")),
            Algorithm::MgamooGd => {
                set.smoothness_bound().map(|beta| Bound::Smooth { beta }).ok_or_else(|| missing("smoothness"))
            }
            Algorithm::EwPolyak | Algorithm::EwGd => {
                Err(AmooError::Config(format!("no upper bound is known for {algorithm}")))
            }
        }
    }
}

/// Whether `empirical` satisfies a bound of the given kind.
pub fn verdict(kind: BoundKind, empirical: f64, bound: f64) -> bool {
    match kind {
        BoundKind::Upper => empirical <= bound * (1.0 + VERDICT_TOLERANCE),
        BoundKind::Lower => empirical >= bound * (1.0 - VERDICT_TOLERANCE),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub k: usize,
    pub empirical: f64,
    pub bound: f64,
    pub kind: BoundKind,
    pub pass: bool,
    /// `bound - empirical` for upper bounds, `empirical - bound` for lower ones.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: Bound,
    pub dist: f64,
    pub epsilon: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// `empirical / bound` at the tightest row: the largest ratio for an
    /// upper bound, the smallest for a lower bound. The bound holds when
    /// this is at most 1 (upper) or at least 1 (lower).
    pub fn binding_ratio(&self) -> f64 {
        let ratios = self.rows.iter().map(|r| r.empirical / r.bound);
        match self.bound.kind() {
            BoundKind::Upper => ratios.fold(f64::NEG_INFINITY, f64::max),
            BoundKind::Lower => ratios.fold(f64::INFINITY, f64::min),
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

/// Which prefix lengths K to check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KGrid {
    All,
    /// Powers of two up to the run length, plus the run length itself.
    Log,
    Explicit(Vec<usize>),
}

impl KGrid {
    fn resolve_for(&self, bound: &Bound, len: usize) -> Vec<usize> {
        let mut ks = self.resolve(len);
        if let Bound::EwLower { m, .. } = bound {
            ks.retain(|k| *k <= *m && 4 * k >= *m);
        }
        ks
    }

    fn resolve(&self, len: usize) -> Vec<usize> {
        match self {
            KGrid::All => (1..=len).collect(),
            KGrid::Log => {
                let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2))
                    .take_while(|k| *k <= len)
                    .collect();
                if ks.last() != Some(&len) && len > 0 {
                    ks.push(len);
                }
                ks
            }
            KGrid::Explicit(ks) => ks.iter().cloned().filter(|k| (1..=len).contains(k)).collect(),
        }
    }
}

/// Constants for [`check_run_against_bounds`]. `dist` defaults to `|x_1 - witness(x_1)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    pub bound: Bound,
    pub dist: Option<f64>,
    pub epsilon: f64,
    pub grid: KGrid,
}

impl BoundConstants {
    pub fn new(bound: Bound) -> Self {
        BoundConstants { bound, dist: None, epsilon: 0.0, grid: KGrid::Log }
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = eps;
        self
    }

    pub fn with_dist(mut self, dist: f64) -> Self {
        self.dist = Some(dist);
        self
    }

    pub fn with_grid(mut self, grid: KGrid) -> Self {
        self.grid = grid;
        self
    }
}

/// Distance from `x1` to the set's solution witness.
pub fn witness_distance(set: &ObjectiveSet, x1: &Point) -> Result<f64> {
    let w = set
        .witness(x1)
        .ok_or_else(|| AmooError::Config("no solution witness; supply dist explicitly".into()))?;
    Ok(x1.distance(&w))
}

/// Compare `MG(x̄_K)` with the bound at every K of the grid.
pub fn check_run_against_bounds(traj: &Trajectory, set: &ObjectiveSet, c: &BoundConstants) -> Result<BoundReport> {
    let x1 = traj.iterates.first().ok_or_else(|| AmooError::Usage("empty trajectory".into()))?;
    let dist = match c.dist {
        Some(d) => d,
        None => witness_distance(set, x1)?,
    };
    let mgs = traj.prefix_average_max_gaps(set)?;
    let kind = c.bound.kind();
    let rows = c
        .grid
        .resolve_for(&c.bound, traj.len())
        .into_iter()
        .map(|k| {
            let bound = c.bound.value(dist, k, c.epsilon)?;
            let empirical = mgs[k - 1];
            let slack = match kind {
                BoundKind::Upper => bound - empirical,
                BoundKind::Lower => empirical - bound,
            };
            Ok(BoundRow { k, empirical, bound, kind, pass: verdict(kind, empirical, bound), slack })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport { bound: c.bound, dist, epsilon: c.epsilon, rows })
}

/// A step where `|x_{k+1} - x*|^2 <= |x_k - x*|^2 - (gap_I - eps)_+^2 / |grad f_I|^2` fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentViolation {
    pub step: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Check the per-step descent inequality against the witness `x_star`,
/// with `I(k)` the max-gap index at `x_k`.
pub fn descent_violations(
    traj: &Trajectory,
    set: &ObjectiveSet,
    x_star: &Point,
    eps: f64,
) -> Result<Vec<DescentViolation>> {
    let mut next: Vec<&Point> = traj.iterates.iter().skip(1).collect();
    if !traj.stopped_early() {
        next.push(&traj.last);
    }
    let mut out = vec![];
    for (k, (x, y)) in traj.iterates.iter().zip(next).enumerate() {
        let gaps = set.gaps(x.as_slice())?;
        let i = argmax_lowest(&gaps);
        let g = norm_sq(&set.gradient(i, x.as_slice())?);
        let before = dist_sq(x.as_slice(), x_star.as_slice());
        let excess = (gaps[i] - eps).max(0.0);
        let gain = if g > 0.0 { excess * excess / g } else { 0.0 };
        let lhs = dist_sq(y.as_slice(), x_star.as_slice());
        let rhs = before - gain;
        if lhs > rhs + INVARIANT_TOLERANCE * before.max(1.0) {
            out.push(DescentViolation { step: k + 1, lhs, rhs });
        }
    }
    Ok(out)
}

/// Prefix lengths K where `MG(x̄_K) <= (1/K) sum_{k<=K} MG(x_k) + 1e-9` fails.
pub fn reduction_violations(traj: &Trajectory, set: &ObjectiveSet) -> Result<Vec<usize>> {
    let mgs = traj.prefix_average_max_gaps(set)?;
    let mut sum = 0.0;
    let mut out = vec![];
    for (k, (avg_mg, step_mg)) in mgs.iter().zip(&traj.per_step_max_gap).enumerate() {
        sum += step_mg;
        if *avg_mg > sum / (k + 1) as f64 + INVARIANT_TOLERANCE {
            out.push(k + 1);
        }
    }
    Ok(out)
}

/// `1 - (1 - 2/m)^K >= 2K / (m + 2K)`.
pub fn geometric_sum_holds(m: usize, k: usize) -> bool {
    let lhs = 1.0 - (1.0 - 2.0 / m as f64).powi(k as i32);
    let rhs = 2.0 * k as f64 / (m as f64 + 2.0 * k as f64);
    lhs >= rhs - 1e-15
}

/// `sum_k f_{I(k)}(x_k) - f_{I(k)}(x*)` over the recorded steps.
pub fn selected_regret(traj: &Trajectory, set: &ObjectiveSet, x_star: &Point) -> Result<f64> {
    let at_star = set.values(x_star.as_slice())?;
    let mut total = 0.0;
    for (x, sel) in traj.iterates.iter().zip(&traj.selected) {
        let i = sel.ok_or_else(|| AmooError::Usage("trajectory has no selected indices".into()))?;
        total += set.finite_value(i, x.as_slice())? - at_star[i];
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub ew_mg: f64,
    pub mgamoo_mg: f64,
    pub dist: f64,
    pub ew_lower_bound: f64,
    pub mgamoo_upper_bound: f64,
    pub separated: bool,
}

/// Equal-weight Polyak against MG-AMOO Polyak on the lower-bound instance
/// with `m` objectives in `R^m`.
pub fn separation_experiment(m: usize, k: usize) -> Result<Separation> {
    if m < 22 || k == 0 || k > m {
        return Err(AmooError::Usage(format!("separation needs m >= 22 and 1 <= K <= m, got m={m}, K={k}")));
    }
    let problem = LowerBoundProblem::new(m, m, 0.1)?;
    let set = problem.objective_set();
    let x1 = problem.start();
    let dist = witness_distance(&set, &x1)?;
    let ew = optimizers::run(&set, &x1, &RunConfig::new(Algorithm::EwPolyak, k))?;
    let mg = optimizers::run(&set, &x1, &RunConfig::new(Algorithm::MgamooPolyak, k))?;
    let ew_mg = crate::metric::max_gap(&set, &average_iterate(&ew)?)?;
    let mgamoo_mg = crate::metric::max_gap(&set, &average_iterate(&mg)?)?;
    let ew_lower_bound = Bound::EwLower { lipschitz: 1.0, m }.value(dist, k, 0.0)?;
    let mgamoo_upper_bound = mgamoo_lipschitz_bound(1.0, dist, k);
    let separated = ew_mg > mgamoo_mg
        && verdict(BoundKind::Lower, ew_mg, ew_lower_bound)
        && verdict(BoundKind::Upper, mgamoo_mg, mgamoo_upper_bound);
    Ok(Separation { ew_mg, mgamoo_mg, dist, ew_lower_bound, mgamoo_upper_bound, separated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub iterations_per_sec: f64,
    /// Rate divided by the rate of the first equal-weight entry.
    pub ratio: f64,
}

/// Wall-clock iteration rate of each configuration on the same problem,
/// each on the calling thread with sequential kernels.
/// Timing slices per algorithm in [`measure_throughput`].
const THROUGHPUT_ROUNDS: u32 = 10;

pub fn measure_throughput(
    set: &ObjectiveSet,
    x1: &Point,
    configs: &[RunConfig],
    warmup: usize,
    duration: Duration,
) -> Result<Vec<ThroughputRecord>> {
    if duration.is_zero() {
        return Err(AmooError::Usage("duration must be positive".into()));
    }
    let baseline = configs
        .iter()
        .position(|c| c.algorithm.is_ew())
        .ok_or_else(|| AmooError::Usage("throughput needs an equal-weight baseline".into()))?;
    let mut states = configs
        .iter()
        .map(|cfg| Ok((optimizers::make_rule(set, x1, cfg, Exec::Sequential)?, x1.clone(), 0usize, Duration::ZERO)))
        .collect::<Result<Vec<_>>>()?;
    let step = |rule: &mut Box<dyn WeightingRule>, x: &mut Point, lr: f64, k: usize| -> Result<()> {
        let plan = rule.plan(set, x, k)?;
        *x = x.step(plan.step_size * lr, &plan.direction)?;
        Ok(())
    };
    for ((rule, x, _, _), cfg) in states.iter_mut().zip(configs) {
        for k in 1..=warmup {
            step(rule, x, cfg.learning_rate, k)?;
        }
    }
    // Round-robin slices so that drift in machine speed hits every algorithm alike.
    let slice = duration / THROUGHPUT_ROUNDS;
    for _ in 0..THROUGHPUT_ROUNDS {
        for ((rule, x, count, elapsed), cfg) in states.iter_mut().zip(configs) {
            let start = Instant::now();
            while start.elapsed() < slice {
                *count += 1;
                step(rule, x, cfg.learning_rate, warmup + *count)?;
            }
            *elapsed += start.elapsed();
        }
    }
    let rates: Vec<_> = states
        .iter()
        .zip(configs)
        .map(|((_, _, count, elapsed), cfg)| (cfg.algorithm, *count, *count as f64 / elapsed.as_secs_f64()))
        .collect();
    let base = rates[baseline].2;
    Ok(rates
        .into_iter()
        .map(|(algorithm, iterations, rate)| ThroughputRecord {
            algorithm,
            iterations,
            iterations_per_sec: rate,
            ratio: rate / base,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_lower_bound_problem;

    #[test]
    fn bound_formulas() {
        assert!((pamoo_upper_bound(1.0, 1.0, 100) - 0.1).abs() < 1e-15);
        assert!((mgamoo_lipschitz_bound(1.0, 1.0, 100) - 0.15).abs() < 1e-15);
        assert!((smooth_bound(1.0, 1.0, 100) - 0.02).abs() < 1e-15);
        assert_eq!(pamoo_upper_bound(2.0, 3.0, 1), 6.0);
        let b = Bound::Pamoo { lipschitz: 1.0 };
        assert!((b.value(1.0, 100, 0.05).unwrap() - 0.15).abs() < 1e-15);
        let b = Bound::Smooth { beta: 1.0 };
        assert!((b.value(1.0, 100, 0.05).unwrap() - 0.12).abs() < 1e-15);
    }

    #[test]
    fn bounds_are_monotone() {
        for k in 1..200 {
            assert!(pamoo_upper_bound(1.3, 2.0, k + 1) < pamoo_upper_bound(1.3, 2.0, k));
            assert!(smooth_bound(0.7, 2.0, k + 1) < smooth_bound(0.7, 2.0, k));
            let lo = |m, k| Bound::EwLower { lipschitz: 1.0, m }.value(1.0, k, 0.0).unwrap();
            assert!(lo(50, k + 1) < lo(50, k));
            assert!(lo(51, k) > lo(50, k));
        }
    }

    #[test]
    fn geometric_sum_grid() {
        for m in 2..=128 {
            for k in 1..=128 {
                assert!(geometric_sum_holds(m, k), "m={m} K={k}");
            }
        }
    }

    #[test]
    fn log_grid() {
        assert_eq!(KGrid::Log.resolve(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(KGrid::Log.resolve(8), vec![1, 2, 4, 8]);
        assert_eq!(KGrid::Explicit(vec![4, 20]).resolve(10), vec![4]);
    }

    #[test]
    fn constant_trajectory_at_optimum_passes() {
        let (set, _) = make_lower_bound_problem(3, 3, 0.1).unwrap();
        let traj = crate::trajectory::from_iterates(vec![Point::zeros(3); 5]);
        let c = BoundConstants::new(Bound::Pamoo { lipschitz: 1.0 }).with_dist(1.0).with_grid(KGrid::All);
        let r = check_run_against_bounds(&traj, &set, &c).unwrap();
        assert!(r.all_pass());
        assert!(r.rows.iter().all(|row| row.empirical == 0.0));
    }

    #[test]
    fn lower_bound_problem_verdicts() {
        let p = LowerBoundProblem::new(16, 16, 0.1).unwrap();
        let (set, x1) = (p.objective_set(), p.start());
        let t = optimizers::run(&set, &x1, &RunConfig::new(Algorithm::Pamoo, 64)).unwrap();
        let r = check_run_against_bounds(&t, &set, &BoundConstants::new(Bound::Pamoo { lipschitz: 1.0 })).unwrap();
        assert!(r.all_pass(), "{r:?}");
        let t = optimizers::run(&set, &x1, &RunConfig::new(Algorithm::EwPolyak, 16)).unwrap();
        let c = BoundConstants::new(Bound::EwLower { lipschitz: 1.0, m: 16 }).with_grid(KGrid::All);
        let r = check_run_against_bounds(&t, &set, &c).unwrap();
        assert_eq!(r.rows.first().map(|row| row.k), Some(4));
        assert!(r.all_pass());
    }

    #[test]
    fn missing_constants_are_config_errors() {
        let (set, x1) = make_lower_bound_problem(3, 3, 0.1).unwrap();
        let set = set.select(&[0, 1, 2]).unwrap();
        let t = optimizers::run(&set, &x1, &RunConfig::new(Algorithm::Pamoo, 2)).unwrap();
        assert!(Bound::for_algorithm(Algorithm::EwGd, &set).is_err());
        let no_witness = ObjectiveSet::new(set.objectives().to_vec()).unwrap();
        let c = BoundConstants::new(Bound::Pamoo { lipschitz: 1.0 });
        assert!(matches!(check_run_against_bounds(&t, &no_witness, &c), Err(AmooError::Config(_))));
    }

    #[test]
    fn separation_at_64() {
        let s = separation_experiment(64, 32).unwrap();
        assert!(s.separated, "{s:?}");
        assert!(s.ew_mg >= 2.64 * s.dist / 32f64.sqrt());
        assert!(separation_experiment(4, 4).is_err());
        assert!(separation_experiment(64, 65).is_err());
    }
}

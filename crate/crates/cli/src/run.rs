//! Executing the runs of an experiment and judging them against their bounds.

use amoo_core::analysis::{
    check_run_against_bounds, descent_violations, Bound, BoundConstants, BoundReport, KGrid,
};
use amoo_core::optimizers::{self, Algorithm};
use amoo_core::parallel::{map_items, Exec};
use amoo_core::{is_in_epsilon_set, ObjectiveSet, Point, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, FamilyKind, RunSpec};

/// Outcome of the checks attached to one run. `None` fields were not applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub bound: Option<BoundReport>,
    pub descent_violations: Option<usize>,
    pub stop_point_in_epsilon_set: Option<bool>,
    /// Why a check was skipped.
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.bound.as_ref().is_none_or(BoundReport::all_pass)
            && self.descent_violations.is_none_or(|v| v == 0)
            && self.stop_point_in_epsilon_set.unwrap_or(true)
    }
}

/// A finished run with its per-step average max gaps.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub trajectory: Trajectory,
    /// `MG(x̄_k)` for k = 1..K.
    pub mg_xbar: Vec<f64>,
    pub verdict: Verdict,
}

impl RunRecord {
    pub fn pass(&self) -> bool {
        self.verdict.pass()
    }
}

/// Either a record or the error that stopped the run.
pub type RunOutcome = Result<RunRecord, String>;

/// Worker count: `AMOO_THREADS`, else the config's `threads`, else all cores.
pub fn worker_count(configured: Option<usize>) -> usize {
    std::env::var("AMOO_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|n: &usize| *n > 0)
        .or(configured)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every `[[run]]` on a pool of `threads` workers. Outcomes come back
/// in config order regardless of completion order.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> anyhow::Result<Vec<(String, RunOutcome)>> {
    let problem = cfg.problem.build()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let outcomes = pool.install(|| {
        map_items(Exec::Parallel, &cfg.runs, |spec| {
            let out = execute(&cfg.problem.family, &problem.set, &problem.x1, spec).map_err(|e| e.to_string());
            (spec.id.clone(), out)
        })
    });
    Ok(outcomes)
}

fn execute(family: &FamilyKind, set: &ObjectiveSet, x1: &Point, spec: &RunSpec) -> amoo_core::Result<RunRecord> {
    let cfg = spec.run_config();
    let trajectory = optimizers::run(set, x1, &cfg)?;
    let mg_xbar = trajectory.prefix_average_max_gaps(set)?;
    let verdict = if spec.checked() {
        judge(family, set, x1, &cfg, &trajectory)?
    } else {
        Verdict { bound: None, descent_violations: None, stop_point_in_epsilon_set: None, notes: vec!["checks disabled".into()] }
    };
    Ok(RunRecord { spec: spec.clone(), trajectory, mg_xbar, verdict })
}

fn judge(
    family: &FamilyKind,
    set: &ObjectiveSet,
    x1: &Point,
    cfg: &amoo_core::optimizers::RunConfig,
    traj: &Trajectory,
) -> amoo_core::Result<Verdict> {
    let mut notes = vec![];
    let eps = cfg.epsilon;
    let witness = set.witness(x1);
    if witness.is_none() {
        notes.push("no solution witness; bound and descent checks skipped".into());
    }
    let bound = match (cfg.algorithm, witness.is_some()) {
        (_, false) => None,
        (Algorithm::EwPolyak, true) if *family == FamilyKind::LowerBound => {
            Some(Bound::EwLower { lipschitz: 1.0, m: set.len() })
        }
        (alg, true) => match Bound::for_algorithm(alg, set) {
            Ok(b) => Some(b),
            Err(e) => {
                notes.push(e.to_string());
                None
            }
        },
    };
    let bound = match bound {
        Some(b) => {
            let c = BoundConstants::new(b).with_epsilon(eps).with_grid(KGrid::Log);
            Some(check_run_against_bounds(traj, set, &c)?)
        }
        None => None,
    };
    let descent = match (&witness, cfg.algorithm) {
        (Some(x_star), Algorithm::Pamoo | Algorithm::MgamooPolyak) => {
            Some(descent_violations(traj, set, x_star, eps)?.len())
        }
        _ => None,
    };
    let stop = match traj.stopped_at {
        Some(_) => Some(is_in_epsilon_set(set, &traj.last, eps)?),
        None => None,
    };
    Ok(Verdict { bound, descent_violations: descent, stop_point_in_epsilon_set: stop, notes })
}

//! Teacher-student training runs on the power-quadratic presets: SGD-style
//! steps on one batch per iteration, max loss tracked on the full dataset.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::analysis::{measure_throughput, ThroughputRecord};
use crate::error::Result;
use crate::metric::max_gap;
use crate::objective::ObjectiveSet;
use crate::optimizers::{make_rule, Algorithm, RunConfig};
use crate::parallel::{map_items, Exec};
use crate::problems::{make_distillation_problem, DistillationConfig, DistillationProblem, PowerQuadraticConfig, Preset};

/// Full-dataset max loss at selected iterations (k = 0 is the initialization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub ks: Vec<usize>,
    pub max_loss: Vec<f64>,
}

impl TrainingCurve {
    pub fn final_max_loss(&self) -> f64 {
        *self.max_loss.last().expect("curve has the initial point")
    }
}

/// Train from the student initialization, cycling through batches in order.
pub fn train(
    problem: &DistillationProblem,
    loss: &PowerQuadraticConfig,
    run: &RunConfig,
    record_every: usize,
    exec: Exec,
) -> Result<TrainingCurve> {
    let full = problem.full_objectives(loss, exec)?;
    let batches: Vec<ObjectiveSet> =
        (0..problem.num_batches()).map(|b| problem.batch_objectives(loss, b, exec)).collect::<Result<_>>()?;
    let mut x = problem.start();
    let mut rule = make_rule(&full, &x, run, exec)?;
    let mut curve = TrainingCurve { ks: vec![0], max_loss: vec![max_gap(&full, &x)?] };
    for k in 1..=run.iterations {
        let set = &batches[(k - 1) % batches.len()];
        let plan = rule.plan(set, &x, k)?;
        if plan.stop {
            break;
        }
        x = x.step(run.learning_rate * plan.step_size, &plan.direction)?;
        if k % record_every.max(1) == 0 || k == run.iterations {
            curve.ks.push(k);
            curve.max_loss.push(max_gap(&full, &x)?);
        }
    }
    Ok(curve)
}

/// One optimizer configuration in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub run: RunConfig,
}

impl Arm {
    /// The arm with its step scaled: the constant step for EW-GD, the learning rate otherwise.
    pub fn scaled(&self, factor: f64) -> RunConfig {
        let mut run = self.run.clone();
        match (run.algorithm, run.gd_step) {
            (Algorithm::EwGd, Some(step)) => run.gd_step = Some(step * factor),
            _ => run.learning_rate *= factor,
        }
        run
    }
}

/// Each arm picks its step multiplier from `step_grid` by the final max loss
/// on `tuning_seed`, then runs on every evaluation seed with that multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskExperiment {
    pub preset: Preset,
    pub base: DistillationConfig,
    pub seeds: Vec<u64>,
    pub tuning_seed: u64,
    pub step_grid: Vec<f64>,
    pub record_every: usize,
    pub arms: Vec<Arm>,
}

/// Largest constant step tried for EW; the Polyak arms start from the plain Polyak step.
pub const EW_MAX_STEP: f64 = 0.8;
pub const STEP_GRID: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
pub const TUNING_SEED: u64 = 1000;
pub const MOMENTUM: f64 = 0.95;

impl DeskExperiment {
    /// Hidden width 32, output dimension 4, input dimension 8 (32 for P3),
    /// five seeds, 2000 iterations, EW / PAMOO / MG-AMOO / MG-AMOO + momentum.
    pub fn standard(preset: Preset) -> Self {
        let input_dim = if preset == Preset::P3 { 32 } else { 8 };
        let iterations = 2000;
        let polyak = |alg| RunConfig::new(alg, iterations);
        DeskExperiment {
            preset,
            base: DistillationConfig { input_dim, ..DistillationConfig::desk(0) },
            seeds: (0..5).collect(),
            tuning_seed: TUNING_SEED,
            step_grid: STEP_GRID.to_vec(),
            record_every: 50,
            arms: vec![
                Arm { label: "EW".into(), run: RunConfig::new(Algorithm::EwGd, iterations).with_gd_step(EW_MAX_STEP) },
                Arm { label: "PAMOO".into(), run: polyak(Algorithm::Pamoo) },
                Arm { label: "MG-AMOO".into(), run: polyak(Algorithm::MgamooPolyak) },
                Arm { label: "MG-AMOO+momentum".into(), run: polyak(Algorithm::MgamooPolyak).with_momentum(MOMENTUM) },
            ],
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.arms.iter_mut().for_each(|a| a.run.iterations = iterations);
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_step_grid(mut self, grid: Vec<f64>) -> Self {
        self.step_grid = grid;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    /// Chosen step multiplier and the configuration actually run.
    pub step_factor: f64,
    pub run: RunConfig,
    pub curves: Vec<TrainingCurve>,
    pub final_losses: Vec<f64>,
    pub median_final: f64,
    /// Per-record median across seeds.
    pub median_curve: TrainingCurve,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn instance(exp: &DeskExperiment, seed: u64) -> Result<(DistillationProblem, PowerQuadraticConfig)> {
    let p = make_distillation_problem(DistillationConfig { seed, ..exp.base })?;
    Ok((p, PowerQuadraticConfig::preset(exp.preset, exp.base.output_dim, seed)))
}

/// Mean of the recorded max losses over the last quarter of the run.
pub fn tail_mean(curve: &TrainingCurve) -> f64 {
    let last = *curve.ks.last().expect("curve has the initial point");
    let tail: Vec<f64> =
        curve.ks.iter().zip(&curve.max_loss).filter(|(k, _)| 4 * **k >= 3 * last).map(|(_, v)| *v).collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Multiplier per arm with the lowest [`tail_mean`] on the tuning seed;
/// runs that blow up count as infinite loss. Ties go to the larger step.
pub fn tune_steps(exp: &DeskExperiment, exec: Exec) -> Result<Vec<f64>> {
    if exp.step_grid.is_empty() {
        return Ok(vec![1.0; exp.arms.len()]);
    }
    let (problem, loss) = instance(exp, exp.tuning_seed)?;
    let jobs: Vec<(usize, usize)> =
        (0..exp.arms.len()).flat_map(|a| (0..exp.step_grid.len()).map(move |g| (a, g))).collect();
    let finals = map_items(exec, &jobs, |&(a, g)| {
        let run = exp.arms[a].scaled(exp.step_grid[g]);
        train(&problem, &loss, &run, exp.record_every, Exec::Sequential)
            .map(|c| tail_mean(&c))
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::INFINITY)
    });
    Ok(finals
        .chunks(exp.step_grid.len())
        .map(|row| exp.step_grid[crate::metric::argmax_lowest(&row.iter().map(|v| -v).collect::<Vec<_>>())])
        .collect())
}

/// Tunes, then runs every (arm, seed) pair as an independent job; results are ordered by arm then seed.
pub fn run_desk_experiment(exp: &DeskExperiment, exec: Exec) -> Result<Vec<ArmSummary>> {
    let factors = tune_steps(exp, exec)?;
    let runs: Vec<RunConfig> = exp.arms.iter().zip(&factors).map(|(a, f)| a.scaled(*f)).collect();
    let problems: Vec<(DistillationProblem, PowerQuadraticConfig)> =
        exp.seeds.iter().map(|&seed| instance(exp, seed)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..exp.arms.len()).flat_map(|a| (0..exp.seeds.len()).map(move |s| (a, s))).collect();
    let curves = map_items(exec, &jobs, |&(a, s)| {
        let (problem, loss) = &problems[s];
        train(problem, loss, &runs[a], exp.record_every, Exec::Sequential)
    });
    let mut curves = curves.into_iter();
    exp.arms
        .iter()
        .zip(factors.iter().zip(runs))
        .map(|(arm, (&step_factor, run))| {
            let arm_curves: Vec<TrainingCurve> = curves.by_ref().take(exp.seeds.len()).collect::<Result<_>>()?;
            let final_losses: Vec<f64> = arm_curves.iter().map(TrainingCurve::final_max_loss).collect();
            let ks = arm_curves[0].ks.clone();
            let max_loss = (0..ks.len())
                .map(|j| median(&arm_curves.iter().filter_map(|c| c.max_loss.get(j).copied()).collect::<Vec<_>>()))
                .collect();
            Ok(ArmSummary {
                label: arm.label.clone(),
                step_factor,
                run,
                median_final: median(&final_losses),
                final_losses,
                median_curve: TrainingCurve { ks, max_loss },
                curves: arm_curves,
            })
        })
        .collect()
}

/// Network shape of the throughput benchmark: 20 inputs, 82 hidden units,
/// 100 outputs, about 10^4 parameters.
pub const THROUGHPUT_NET: (usize, usize, usize) = (20, 82, 100);
pub const THROUGHPUT_BATCH: usize = 64;

/// Iterations per second of EW, MG-AMOO (Polyak) and PAMOO on the three
/// P1 losses of one distillation batch, single-threaded. Ratios are
/// relative to EW.
pub fn throughput_benchmark(warmup: usize, duration: Duration) -> Result<Vec<ThroughputRecord>> {
    let (input_dim, hidden, output_dim) = THROUGHPUT_NET;
    let cfg = DistillationConfig { seed: 0, input_dim, hidden, output_dim, batches: 1, batch_size: THROUGHPUT_BATCH };
    let problem = make_distillation_problem(cfg)?;
    let set = problem.batch_objectives(&PowerQuadraticConfig::p1(output_dim), 0, Exec::Sequential)?;
    let x1 = problem.start();
    let configs = [
        RunConfig::new(Algorithm::EwGd, 1).with_gd_step(1e-3),
        RunConfig::new(Algorithm::MgamooPolyak, 1).with_learning_rate(0.01),
        RunConfig::new(Algorithm::Pamoo, 1).with_learning_rate(0.01),
    ];
    measure_throughput(&set, &x1, &configs, warmup, duration)
}

use serde::{Deserialize, Serialize};

use crate::error::{AmooError, Result};
use crate::metric::max_gap;
use crate::objective::ObjectiveSet;
use crate::point::{Point, WeightVector};

/// Non-fatal events recorded during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    /// The weight solver hit its iteration cap; the best iterate was used.
    QpNotConverged { step: usize, residual: f64 },
    /// An objective with zero gradient but positive gap was left out of the weight subproblem.
    DroppedZeroCurvature { step: usize, index: usize },
}

/// Iterates x_1..x_K of a run plus per-step records.
///
/// Entry `k - 1` of every per-step vector describes the step taken at x_k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub iterates: Vec<Point>,
    pub weights: Vec<WeightVector>,
    pub per_step_max_gap: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// Objective handed to the single-objective optimizer (MG-AMOO only).
    pub selected: Vec<Option<usize>>,
    /// 1-based index of the iterate returned by the epsilon stopping rule.
    pub stopped_at: Option<usize>,
    /// The point after the last step (x_{K+1}), or the stopped iterate.
    pub last: Point,
    pub diagnostics: Vec<Diagnostic>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn stopped_early(&self) -> bool {
        self.stopped_at.is_some()
    }

    pub fn dim(&self) -> usize {
        self.last.dim()
    }

    /// Uniform average of the first `k` iterates.
    pub fn average_of_first(&self, k: usize) -> Result<Point> {
        if k == 0 || k > self.iterates.len() {
            return Err(AmooError::Usage(format!(
                "cannot average the first {k} of {} iterates",
                self.iterates.len()
            )));
        }
        let mut mean = self.iterates[0].as_slice().to_vec();
        for (j, x) in self.iterates[1..k].iter().enumerate() {
            accumulate_mean(&mut mean, x.as_slice(), j + 2);
        }
        Point::new(mean)
    }

    /// MG of the prefix averages x̄_k for every k = 1..=K.
    pub fn prefix_average_max_gaps(&self, set: &ObjectiveSet) -> Result<Vec<f64>> {
        let mut mean = self.iterates.first().map(|x| x.as_slice().to_vec()).unwrap_or_default();
        let mut out = Vec::with_capacity(self.len());
        for (k, x) in self.iterates.iter().enumerate() {
            if k > 0 {
                accumulate_mean(&mut mean, x.as_slice(), k + 1);
            }
            out.push(max_gap(set, &Point::new(mean.clone())?)?);
        }
        Ok(out)
    }
}

/// Running mean update with the `count`-th sample; exact on constant sequences.
fn accumulate_mean(mean: &mut [f64], x: &[f64], count: usize) {
    let inv = 1.0 / count as f64;
    for (m, v) in mean.iter_mut().zip(x) {
        *m += (v - *m) * inv;
    }
}

/// `x̄ = (1/K) sum_k x_k` over the whole trajectory.
pub fn average_iterate(traj: &Trajectory) -> Result<Point> {
    if traj.iterates.is_empty() {
        return Err(AmooError::Usage("cannot average an empty trajectory".into()));
    }
    traj.average_of_first(traj.iterates.len())
}

#[cfg(test)]
pub(crate) fn from_iterates(iterates: Vec<Point>) -> Trajectory {
    let k = iterates.len();
    let m = 1;
    Trajectory {
        last: iterates.last().cloned().unwrap_or_else(|| Point::zeros(1)),
        iterates,
        weights: vec![WeightVector::zeros(m); k],
        per_step_max_gap: vec![0.0; k],
        step_sizes: vec![0.0; k],
        selected: vec![None; k],
        stopped_at: None,
        diagnostics: vec![],
    }
}

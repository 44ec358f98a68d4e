//! Weighting rules: each turns the state at x_k into a step direction
//! `sum_i w_i grad f_i(x_k)` and a step size.

use crate::error::Result;
use crate::linalg::{axpy, norm_sq};
use crate::metric::argmax_lowest;
use crate::objective::ObjectiveSet;
use crate::point::{Point, WeightVector};
use crate::trajectory::Diagnostic;
use crate::weights_qp::{
    gram_from_gradients, solve_nonneg_qp, Gram, WeightSubproblem, DEFAULT_MAX_ITERS, DEFAULT_TOL, POSITIVE_GAP,
    ZERO_CURVATURE,
};
use crate::parallel::Exec;

use super::momentum::apply_momentum;
use super::soo::{Polyak, SooStep};

#[derive(Debug, Clone)]
pub struct StepPlan {
    pub weights: WeightVector,
    pub step_size: f64,
    pub direction: Vec<f64>,
    pub selected: Option<usize>,
    /// `MG(x_k)` as seen by the rule.
    pub max_gap: f64,
    /// Return x_k instead of stepping.
    pub stop: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl StepPlan {
    fn stop_here(m: usize, n: usize, max_gap: f64) -> Self {
        StepPlan {
            weights: WeightVector::zeros(m),
            step_size: 0.0,
            direction: vec![0.0; n],
            selected: None,
            max_gap,
            stop: true,
            diagnostics: vec![],
        }
    }
}

pub trait WeightingRule: Send {
    fn plan(&mut self, set: &ObjectiveSet, x: &Point, k: usize) -> Result<StepPlan>;
}

fn max_of(gaps: &[f64]) -> f64 {
    gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Equal weights with either the Polyak step on f_EW or a constant step.
pub struct EqualWeights {
    /// `Some(f_EW^*)` selects the Polyak step.
    pub polyak_optimum: Option<f64>,
    pub constant_step: f64,
}

impl WeightingRule for EqualWeights {
    fn plan(&mut self, set: &ObjectiveSet, x: &Point, k: usize) -> Result<StepPlan> {
        let m = set.len();
        let eval = set.linearize(x.as_slice())?;
        let values = eval.values();
        let gaps = eval.gaps();
        let w = WeightVector::uniform(m);
        let direction = eval.weighted_gradient(w.as_slice())?;
        let step_size = match self.polyak_optimum {
            Some(opt) => {
                let f_ew = values.iter().sum::<f64>() / m as f64;
                Polyak.step_size(k, f_ew - opt, norm_sq(&direction), 0.0)?
            }
            None => self.constant_step,
        };
        Ok(StepPlan {
            weights: w,
            step_size,
            direction,
            selected: None,
            max_gap: max_of(&gaps),
            stop: false,
            diagnostics: vec![],
        })
    }
}

/// `w = argmax_{w >= 0} 2 w^T delta - w^T J^T J w`, step `J w`.
pub struct Pamoo {
    pub epsilon: f64,
    pub stop_on_epsilon: bool,
    pub exec: Exec,
}

impl WeightingRule for Pamoo {
    fn plan(&mut self, set: &ObjectiveSet, x: &Point, k: usize) -> Result<StepPlan> {
        let m = set.len();
        let n = set.dim();
        let eval = set.linearize(x.as_slice())?;
        let gaps = eval.gaps();
        let mg = max_of(&gaps);
        if self.stop_on_epsilon && mg < self.epsilon {
            return Ok(StepPlan::stop_here(m, n, mg));
        }
        let grads = eval.gradients()?;
        let gram = gram_from_gradients(&grads, self.exec);
        let delta: Vec<f64> = gaps.iter().map(|g| g - self.epsilon).collect();

        let mut diagnostics = vec![];
        let mut kept = vec![];
        for i in 0..m {
            if gram.get(i, i) <= ZERO_CURVATURE && delta[i] > POSITIVE_GAP {
                diagnostics.push(Diagnostic::DroppedZeroCurvature { step: k, index: i });
            } else {
                kept.push(i);
            }
        }
        let mut w = vec![0.0; m];
        if !kept.is_empty() && kept.iter().any(|&i| delta[i] > 0.0) {
            let rows = kept.iter().map(|&i| kept.iter().map(|&j| gram.get(i, j)).collect()).collect();
            let sub = WeightSubproblem::new(kept.iter().map(|&i| delta[i]).collect(), Gram::from_rows(rows)?)?;
            let sol = solve_nonneg_qp(&sub, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
            if !sol.converged {
                diagnostics.push(Diagnostic::QpNotConverged { step: k, residual: sol.residual });
            }
            for (&i, &wi) in kept.iter().zip(sol.weights.as_slice()) {
                w[i] = wi;
            }
        }
        let mut direction = vec![0.0; n];
        for (wi, g) in w.iter().zip(&grads) {
            if *wi != 0.0 {
                axpy(*wi, g, &mut direction);
            }
        }
        Ok(StepPlan {
            weights: WeightVector::new(w)?,
            step_size: 1.0,
            direction,
            selected: None,
            max_gap: mg,
            stop: false,
            diagnostics,
        })
    }
}

/// Hand the objective with the largest gap to a single-objective optimizer.
pub struct MaxGap {
    pub soo: Box<dyn SooStep>,
    pub epsilon: f64,
    pub stop_on_epsilon: bool,
    pub momentum: Option<f64>,
    prev: Option<WeightVector>,
}

impl MaxGap {
    pub fn new(soo: Box<dyn SooStep>, epsilon: f64, stop_on_epsilon: bool, momentum: Option<f64>) -> Self {
        MaxGap { soo, epsilon, stop_on_epsilon, momentum, prev: None }
    }
}

impl WeightingRule for MaxGap {
    fn plan(&mut self, set: &ObjectiveSet, x: &Point, k: usize) -> Result<StepPlan> {
        let m = set.len();
        let eval = set.linearize(x.as_slice())?;
        let gaps = eval.gaps();
        let i = argmax_lowest(&gaps);
        let mg = gaps[i];
        if self.stop_on_epsilon && mg < self.epsilon {
            return Ok(StepPlan::stop_here(m, set.dim(), mg));
        }
        let one_hot = WeightVector::one_hot(m, i);
        let w = match self.momentum {
            Some(beta) => {
                let prev = self.prev.take().unwrap_or_else(|| one_hot.clone());
                apply_momentum(&prev, &one_hot, beta)?
            }
            None => one_hot,
        };
        let gap_w: f64 = w.as_slice().iter().zip(&gaps).map(|(a, g)| a * g).sum();
        let direction = eval.weighted_gradient(w.as_slice())?;
        let step_size = self.soo.step_size(k, gap_w, norm_sq(&direction), self.epsilon * w.sum())?;
        if self.momentum.is_some() {
            self.prev = Some(w.clone());
        }
        Ok(StepPlan {
            weights: w,
            step_size,
            direction,
            selected: Some(i),
            max_gap: mg,
            stop: false,
            diagnostics: vec![],
        })
    }
}

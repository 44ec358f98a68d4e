//! Objectives, objective sets and the evaluation contract shared by every algorithm.
//!
//! Objective callbacks must be pure and re-entrant: sets are shared across
//! worker threads without synchronization.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure_all_finite, ensure_finite, AmooError, Result};
use crate::point::Point;

/// Slack for gap-nonnegativity assertions (kinks of |.| and rounding).
pub const EVAL_TOLERANCE: f64 = 1e-9;

/// A convex objective with a known optimal value.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient, or a subgradient where the objective is not differentiable.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn optimal_value(&self) -> f64;

    /// Known bound G on the (sub)gradient norm.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }

    /// Known smoothness constant beta.
    fn smoothness_bound(&self) -> Option<f64> {
        None
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Objective assembled from closures.
#[derive(Clone)]
pub struct FnObjective {
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradFn>,
    optimal_value: f64,
    lipschitz: Option<f64>,
    smoothness: Option<f64>,
}

impl FnObjective {
    pub fn new(
        dim: usize,
        optimal_value: f64,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnObjective {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            optimal_value,
            lipschitz: None,
            smoothness: None,
        }
    }

    pub fn with_lipschitz(mut self, g: f64) -> Self {
        self.lipschitz = Some(g);
        self
    }

    pub fn with_smoothness(mut self, beta: f64) -> Self {
        self.smoothness = Some(beta);
        self
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn optimal_value(&self) -> f64 {
        self.optimal_value
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz
    }
    fn smoothness_bound(&self) -> Option<f64> {
        self.smoothness
    }
}

/// Evaluates all objectives of a set in one pass when they share work
/// (e.g. a forward pass through a network).
pub trait JointEvaluator: Send + Sync {
    fn values(&self, x: &[f64]) -> Vec<f64>;

    /// `sum_i w_i grad f_i(x)`.
    fn weighted_gradient(&self, x: &[f64], weights: &[f64]) -> Vec<f64>;

    /// Evaluates at `x` once so that several gradient combinations can reuse
    /// the shared work. The default recomputes everything on each request.
    fn linearize<'a>(&'a self, x: &'a [f64]) -> Box<dyn Linearization + 'a> {
        Box::new(Recompute { eval: self, x, values: self.values(x) })
    }

    /// All m gradients. The default runs one weighted pass per objective.
    fn gradients(&self, x: &[f64], m: usize) -> Vec<Vec<f64>> {
        (0..m)
            .map(|i| {
                let mut w = vec![0.0; m];
                w[i] = 1.0;
                self.weighted_gradient(x, &w)
            })
            .collect()
    }
}

/// Values at a fixed point plus on-demand gradient combinations there.
pub trait Linearization: Send + Sync {
    fn values(&self) -> &[f64];

    /// Row r of the result is `sum_i weight_rows[r][i] grad f_i(x)`.
    fn weighted_gradients(&self, weight_rows: &[Vec<f64>]) -> Vec<Vec<f64>>;
}

struct Recompute<'a, E: ?Sized> {
    eval: &'a E,
    x: &'a [f64],
    values: Vec<f64>,
}

impl<E: JointEvaluator + ?Sized> Linearization for Recompute<'_, E> {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn weighted_gradients(&self, weight_rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        weight_rows.iter().map(|w| self.eval.weighted_gradient(self.x, w)).collect()
    }
}

/// Maps a start point to a point of the (approximate) common solution set,
/// ideally its Euclidean projection.
pub type SolutionWitness = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// The vector objective F = (f_1, ..., f_m).
#[derive(Clone)]
pub struct ObjectiveSet {
    objectives: Vec<Arc<dyn Objective>>,
    alignment_epsilon: f64,
    joint: Option<Arc<dyn JointEvaluator>>,
    witness: Option<SolutionWitness>,
}

impl fmt::Debug for ObjectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSet")
            .field("m", &self.len())
            .field("dim", &self.dim())
            .field("alignment_epsilon", &self.alignment_epsilon)
            .field("joint", &self.joint.is_some())
            .field("witness", &self.witness.is_some())
            .finish()
    }
}

impl ObjectiveSet {
    pub fn new(objectives: Vec<Arc<dyn Objective>>) -> Result<Self> {
        let Some(first) = objectives.first() else {
            return Err(AmooError::Config("objective set needs at least one objective".into()));
        };
        let n = first.dim();
        if n == 0 {
            return Err(AmooError::Config("objective dimension must be at least 1".into()));
        }
        if let Some(i) = objectives.iter().position(|o| o.dim() != n) {
            return Err(AmooError::Config(format!(
                "objective {i} has dimension {} but objective 0 has {n}",
                objectives[i].dim()
            )));
        }
        Ok(ObjectiveSet { objectives, alignment_epsilon: 0.0, joint: None, witness: None })
    }

    pub fn with_alignment_epsilon(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(AmooError::Config(format!("alignment epsilon must be >= 0, got {eps}")));
        }
        self.alignment_epsilon = eps;
        Ok(self)
    }

    pub fn with_joint(mut self, joint: Arc<dyn JointEvaluator>) -> Self {
        self.joint = Some(joint);
        self
    }

    pub fn with_witness(mut self, witness: SolutionWitness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.objectives[0].dim()
    }

    pub fn alignment_epsilon(&self) -> f64 {
        self.alignment_epsilon
    }

    pub fn objective(&self, i: usize) -> &Arc<dyn Objective> {
        &self.objectives[i]
    }

    pub fn objectives(&self) -> &[Arc<dyn Objective>] {
        &self.objectives
    }

    pub fn optimal_values(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| o.optimal_value()).collect()
    }

    /// Largest known Lipschitz bound, if every objective has one.
    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.objectives.iter().map(|o| o.lipschitz_bound()).try_fold(0.0_f64, |acc, g| g.map(|g| acc.max(g)))
    }

    /// Largest known smoothness constant, if every objective has one.
    pub fn smoothness_bound(&self) -> Option<f64> {
        self.objectives.iter().map(|o| o.smoothness_bound()).try_fold(0.0_f64, |acc, b| b.map(|b| acc.max(b)))
    }

    pub fn witness(&self, x1: &Point) -> Option<Point> {
        self.witness.as_ref().map(|w| w(x1))
    }

    pub fn has_witness(&self) -> bool {
        self.witness.is_some()
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(AmooError::Config(format!(
                "point has dimension {} but objectives expect {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let v = match &self.joint {
            Some(j) => j.values(x),
            None => self.objectives.iter().map(|o| o.value(x)).collect(),
        };
        ensure_all_finite("objective value", &v)?;
        Ok(v)
    }

    /// Gaps f_i(x) - f_i^*, computed from the stored optimal values.
    pub fn gaps(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.values(x)?;
        for (vi, o) in v.iter_mut().zip(&self.objectives) {
            *vi -= o.optimal_value();
        }
        Ok(v)
    }

    pub fn gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let g = match &self.joint {
            Some(j) => {
                let mut w = vec![0.0; self.len()];
                w[i] = 1.0;
                j.weighted_gradient(x, &w)
            }
            None => self.objectives[i].gradient(x),
        };
        ensure_all_finite("gradient", &g)?;
        Ok(g)
    }

    pub fn gradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        let gs = match &self.joint {
            Some(j) => j.gradients(x, self.len()),
            None => self.objectives.iter().map(|o| o.gradient(x)).collect(),
        };
        for g in &gs {
            ensure_all_finite("gradient", g)?;
        }
        Ok(gs)
    }

    /// `grad f_w(x) = sum_i w_i grad f_i(x)`, skipping zero weights.
    pub fn weighted_gradient(&self, x: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if weights.len() != self.len() {
            return Err(AmooError::Usage(format!(
                "weight vector has length {} for {} objectives",
                weights.len(),
                self.len()
            )));
        }
        let g = match &self.joint {
            Some(j) => j.weighted_gradient(x, weights),
            None => {
                let mut acc = vec![0.0; self.dim()];
                for (o, &w) in self.objectives.iter().zip(weights) {
                    if w != 0.0 {
                        crate::linalg::axpy(w, &o.gradient(x), &mut acc);
                    }
                }
                acc
            }
        };
        ensure_all_finite("gradient", &g)?;
        Ok(g)
    }

    /// Evaluates every objective at `x`, keeping shared work for the
    /// gradient requests that follow.
    pub fn linearize<'a>(&'a self, x: &'a [f64]) -> Result<PointEval<'a>> {
        self.check_dim(x)?;
        let joint = self.joint.as_ref().map(|j| j.linearize(x));
        let values = match &joint {
            Some(l) => l.values().to_vec(),
            None => self.objectives.iter().map(|o| o.value(x)).collect(),
        };
        ensure_all_finite("objective value", &values)?;
        Ok(PointEval { set: self, x, joint, values })
    }

    /// Restricts the set to a subset of objectives, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<ObjectiveSet> {
        let objectives = indices
            .iter()
            .map(|&i| {
                self.objectives
                    .get(i)
                    .cloned()
                    .ok_or_else(|| AmooError::Usage(format!("objective index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut set = ObjectiveSet::new(objectives)?;
        set.alignment_epsilon = self.alignment_epsilon;
        set.witness = self.witness.clone();
        Ok(set)
    }

    pub(crate) fn finite_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        ensure_finite("objective value", self.objectives[i].value(x))
    }
}

/// Objective values at one point with gradient access that reuses shared work.
pub struct PointEval<'a> {
    set: &'a ObjectiveSet,
    x: &'a [f64],
    joint: Option<Box<dyn Linearization + 'a>>,
    values: Vec<f64>,
}

impl PointEval<'_> {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.values.iter().zip(&self.set.objectives).map(|(v, o)| v - o.optimal_value()).collect()
    }

    /// Row r of the result is `sum_i weight_rows[r][i] grad f_i(x)`.
    pub fn gradient_rows(&self, weight_rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let m = self.set.len();
        if let Some(w) = weight_rows.iter().find(|w| w.len() != m) {
            return Err(AmooError::Usage(format!("weight vector has length {} for {m} objectives", w.len())));
        }
        let rows = match &self.joint {
            Some(l) => l.weighted_gradients(weight_rows),
            None => {
                let mut cache: Vec<Option<Vec<f64>>> = vec![None; m];
                weight_rows
                    .iter()
                    .map(|w| {
                        let mut acc = vec![0.0; self.set.dim()];
                        for (i, &wi) in w.iter().enumerate() {
                            if wi != 0.0 {
                                let g = cache[i].get_or_insert_with(|| self.set.objectives[i].gradient(self.x));
                                crate::linalg::axpy(wi, g, &mut acc);
                            }
                        }
                        acc
                    })
                    .collect()
            }
        };
        for g in &rows {
            ensure_all_finite("gradient", g)?;
        }
        Ok(rows)
    }

    pub fn weighted_gradient(&self, weights: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gradient_rows(&[weights.to_vec()])?.pop().expect("one row"))
    }

    pub fn gradients(&self) -> Result<Vec<Vec<f64>>> {
        let m = self.set.len();
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut w = vec![0.0; m];
                w[i] = 1.0;
                w
            })
            .collect();
        self.gradient_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq() -> Arc<dyn Objective> {
        Arc::new(FnObjective::new(2, 0.0, |x| x[0] * x[0], |x| vec![2.0 * x[0], 0.0]).with_smoothness(2.0))
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(ObjectiveSet::new(vec![]).is_err());
        let other: Arc<dyn Objective> = Arc::new(FnObjective::new(3, 0.0, |_| 0.0, |_| vec![0.0; 3]));
        assert!(ObjectiveSet::new(vec![sq(), other]).is_err());
    }

    #[test]
    fn bounds_require_every_objective() {
        let bare: Arc<dyn Objective> = Arc::new(FnObjective::new(2, 0.0, |_| 0.0, |_| vec![0.0; 2]));
        let set = ObjectiveSet::new(vec![sq(), sq()]).unwrap();
        assert_eq!(set.smoothness_bound(), Some(2.0));
        assert_eq!(set.lipschitz_bound(), None);
        let set = ObjectiveSet::new(vec![sq(), bare]).unwrap();
        assert_eq!(set.smoothness_bound(), None);
    }

    #[test]
    fn weighted_gradient_skips_zero_weights() {
        let set = ObjectiveSet::new(vec![sq(), sq()]).unwrap();
        let g = set.weighted_gradient(&[1.0, 0.0], &[0.5, 0.0]).unwrap();
        assert_eq!(g, vec![1.0, 0.0]);
        assert!(set.weighted_gradient(&[1.0, 0.0], &[1.0]).is_err());
        assert!(set.values(&[1.0]).is_err());
    }
}

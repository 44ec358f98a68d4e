//! Teacher-student distillation: a student network fits a frozen teacher
//! on inputs drawn from Uniform([-1, 1]^d).
//!
//! Losses depend only on the output displacement `h_student - h_teacher`,
//! so a constant offset added to the teacher's targets changes nothing and
//! is not modeled.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::network::NetShape;
use super::power_quadratic::{Displacement, ForwardCache, PowerQuadraticConfig, PowerQuadraticProblem};
use crate::error::{AmooError, Result};
use crate::objective::ObjectiveSet;
use crate::parallel::Exec;
use crate::point::Point;
use crate::rng::{self, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillationConfig {
    pub seed: u64,
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub batches: usize,
    pub batch_size: usize,
}

impl DistillationConfig {
    /// Small configuration that trains in seconds.
    pub fn desk(seed: u64) -> Self {
        DistillationConfig { seed, input_dim: 8, hidden: 32, output_dim: 4, batches: 20, batch_size: 64 }
    }

    /// 1000 batches of 1000 points in 20 dimensions, 512 hidden units.
    pub fn paper_scale(seed: u64, output_dim: usize) -> Self {
        DistillationConfig { seed, input_dim: 20, hidden: 512, output_dim, batches: 1000, batch_size: 1000 }
    }

    pub fn shape(&self) -> NetShape {
        NetShape { input: self.input_dim, hidden: self.hidden, output: self.output_dim }
    }

    pub fn num_samples(&self) -> usize {
        self.batches * self.batch_size
    }
}

/// Inputs and frozen teacher outputs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, s: usize) -> &[f64] {
        &self.inputs[s * self.input_dim..(s + 1) * self.input_dim]
    }

    pub fn target(&self, s: usize) -> &[f64] {
        &self.targets[s * self.output_dim..(s + 1) * self.output_dim]
    }
}

pub struct DistillationProblem {
    pub config: DistillationConfig,
    pub teacher: Vec<f64>,
    pub student_init: Vec<f64>,
    pub data: Arc<Dataset>,
}

/// Builds teacher, student initialization and dataset from independent streams of `seed`.
pub fn make_distillation_problem(config: DistillationConfig) -> Result<DistillationProblem> {
    let c = config;
    if c.input_dim == 0 || c.hidden == 0 || c.output_dim == 0 || c.batches == 0 || c.batch_size == 0 {
        return Err(AmooError::Config(format!("distillation dimensions must be >= 1: {c:?}")));
    }
    let shape = c.shape();
    let teacher = shape.init(&mut rng::stream(c.seed, streams::TEACHER));
    let student_init = shape.init(&mut rng::stream(c.seed, streams::STUDENT));
    let mut data_rng = rng::stream(c.seed, streams::DATA);
    let inputs: Vec<f64> = (0..c.num_samples() * c.input_dim).map(|_| data_rng.gen_range(-1.0..=1.0)).collect();
    let targets = inputs.chunks(c.input_dim).flat_map(|x| shape.forward(&teacher, x)).collect();
    let data = Arc::new(Dataset { inputs, targets, input_dim: c.input_dim, output_dim: c.output_dim });
    Ok(DistillationProblem { config, teacher, student_init, data })
}

/// `d_s = h_theta(x_s) - h_teacher(x_s)`.
pub struct NetworkDisplacement {
    shape: NetShape,
    data: Arc<Dataset>,
}

impl Displacement for NetworkDisplacement {
    fn param_dim(&self) -> usize {
        self.shape.param_count()
    }
    fn output_dim(&self) -> usize {
        self.shape.output
    }
    fn num_samples(&self) -> usize {
        self.data.len()
    }
    fn forward_cached(&self, theta: &[f64], sample: usize) -> ForwardCache {
        let (z, mut y) = self.shape.forward_cached(theta, self.data.input(sample));
        y.iter_mut().zip(self.data.target(sample)).for_each(|(a, t)| *a -= t);
        ForwardCache { output: y, state: z }
    }
    fn backward_cached(
        &self,
        theta: &[f64],
        sample: usize,
        cache: &ForwardCache,
        cotangents: &[Vec<f64>],
        acc: &mut [Vec<f64>],
    ) {
        self.shape.backward_from(theta, self.data.input(sample), &cache.state, cotangents, acc);
    }
}

impl DistillationProblem {
    pub fn start(&self) -> Point {
        Point::new(self.student_init.clone()).expect("finite init")
    }

    pub fn num_batches(&self) -> usize {
        self.config.batches
    }

    fn displacement(&self) -> Arc<dyn Displacement> {
        Arc::new(NetworkDisplacement { shape: self.config.shape(), data: self.data.clone() })
    }

    /// Losses over batch `b`.
    pub fn batch_objectives(&self, loss: &PowerQuadraticConfig, b: usize, exec: Exec) -> Result<ObjectiveSet> {
        if b >= self.config.batches {
            return Err(AmooError::Usage(format!("batch {b} out of {}", self.config.batches)));
        }
        let bs = self.config.batch_size;
        Ok(PowerQuadraticProblem::new(loss.clone(), self.displacement())?
            .with_samples(b * bs..(b + 1) * bs)?
            .with_exec(exec)
            .into_objective_set())
    }

    /// Losses over the whole dataset.
    pub fn full_objectives(&self, loss: &PowerQuadraticConfig, exec: Exec) -> Result<ObjectiveSet> {
        Ok(PowerQuadraticProblem::new(loss.clone(), self.displacement())?.with_exec(exec).into_objective_set())
    }

    /// Smallest |pre-activation| over the given samples; finite differences
    /// are reliable when this is well above the step size.
    pub fn min_abs_preactivation(&self, theta: &[f64], samples: std::ops::Range<usize>) -> f64 {
        let shape = self.config.shape();
        samples
            .flat_map(|s| shape.preactivations(theta, self.data.input(s)))
            .map(f64::abs)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let a = make_distillation_problem(DistillationConfig::desk(11)).unwrap();
        let b = make_distillation_problem(DistillationConfig::desk(11)).unwrap();
        assert!(a.teacher.iter().zip(&b.teacher).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.data, b.data);
        assert_ne!(a.teacher, a.student_init);
        let c = make_distillation_problem(DistillationConfig::desk(12)).unwrap();
        assert_ne!(a.teacher, c.teacher);
    }

    #[test]
    fn inputs_in_unit_box() {
        let p = make_distillation_problem(DistillationConfig::desk(0)).unwrap();
        assert_eq!(p.data.len(), 20 * 64);
        assert!(p.data.inputs.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn teacher_parameters_have_zero_loss() {
        let p = make_distillation_problem(DistillationConfig::desk(1)).unwrap();
        let set = p.full_objectives(&PowerQuadraticConfig::p1(4), Exec::Sequential).unwrap();
        assert_eq!(set.values(&p.teacher).unwrap(), vec![0.0; 3]);
        assert!(set.values(&p.student_init).unwrap().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn cached_pass_matches_separate_evaluation_bitwise() {
        let p = make_distillation_problem(DistillationConfig::desk(5)).unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let set = p.full_objectives(&PowerQuadraticConfig::p2(4), exec).unwrap();
            let x = p.student_init.as_slice();
            let eval = set.linearize(x).unwrap();
            assert_eq!(eval.values(), set.values(x).unwrap().as_slice());
            assert_eq!(eval.gradients().unwrap(), set.gradients(x).unwrap());
            let w = [0.2, 0.0, 0.8];
            assert_eq!(eval.weighted_gradient(&w).unwrap(), set.weighted_gradient(x, &w).unwrap());
        }
    }

    #[test]
    fn shifted_teacher_is_optimal_for_shifted_loss() {
        let p = make_distillation_problem(DistillationConfig::desk(2)).unwrap();
        let loss = PowerQuadraticConfig::p2(4);
        let set = p.batch_objectives(&loss, 0, Exec::Sequential).unwrap();
        let mut theta = p.teacher.clone();
        let n = theta.len();
        theta[n - 4..].iter_mut().for_each(|b| *b += 0.05);
        let v = set.values(&theta).unwrap();
        assert!(v[1] < 1e-28, "{v:?}");
    }

    #[test]
    fn execution_policy_does_not_change_results() {
        let p = make_distillation_problem(DistillationConfig::desk(4)).unwrap();
        let loss = PowerQuadraticConfig::p1(4);
        let seq = p.full_objectives(&loss, Exec::Sequential).unwrap();
        let par = p.full_objectives(&loss, Exec::Parallel).unwrap();
        let x = &p.student_init;
        assert_eq!(seq.values(x).unwrap(), par.values(x).unwrap());
        assert_eq!(seq.gradients(x).unwrap(), par.gradients(x).unwrap());
    }
}

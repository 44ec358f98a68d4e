//! Losses `f_i(theta) = mean_s q_i(d_s)^alpha_i` with
//! `q_i(d) = (d - shift_i 1)^T H_i (d - shift_i 1)` and `d_s = displacement(theta, s)`.
//!
//! `f_i^* = 0`, attained wherever every displacement equals `shift_i 1`.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{AmooError, Result};
use crate::objective::{JointEvaluator, Linearization, Objective, ObjectiveSet};
use crate::parallel::{map_chunks, map_reduce_chunks, Exec};
use crate::rng;

/// A displacement together with whatever its backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub output: Vec<f64>,
    pub state: Vec<f64>,
}

/// A map from parameters to one output-space vector per sample.
pub trait Displacement: Send + Sync {
    fn param_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn num_samples(&self) -> usize;

    fn forward_cached(&self, theta: &[f64], sample: usize) -> ForwardCache;

    fn forward(&self, theta: &[f64], sample: usize) -> Vec<f64> {
        self.forward_cached(theta, sample).output
    }

    /// Adds the pull-back of each output-space cotangent into the matching entry of `acc`.
    fn backward_cached(
        &self,
        theta: &[f64],
        sample: usize,
        cache: &ForwardCache,
        cotangents: &[Vec<f64>],
        acc: &mut [Vec<f64>],
    );

    /// True when the map is `d = theta` (single sample).
    fn is_identity(&self) -> bool {
        false
    }
}

/// `d = theta`.
#[derive(Debug, Clone)]
pub struct IdentityDisplacement {
    pub dim: usize,
}

impl Displacement for IdentityDisplacement {
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn num_samples(&self) -> usize {
        1
    }
    fn forward_cached(&self, theta: &[f64], _sample: usize) -> ForwardCache {
        ForwardCache { output: theta.to_vec(), state: vec![] }
    }
    fn backward_cached(
        &self,
        _theta: &[f64],
        _sample: usize,
        _cache: &ForwardCache,
        cotangents: &[Vec<f64>],
        acc: &mut [Vec<f64>],
    ) {
        for (a, c) in acc.iter_mut().zip(cotangents) {
            crate::linalg::axpy(1.0, c, a);
        }
    }
    fn is_identity(&self) -> bool {
        true
    }
}

/// Per-objective shape parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerQuadraticConfig {
    /// Diagonals of the positive-definite H_i.
    pub hessian_diagonals: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub shifts: Vec<f64>,
}

/// How the ill-conditioned diagonal is split: entries past `unscaled_leading`
/// are multiplied by `tail_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IllConditioning {
    pub unscaled_leading: usize,
    pub tail_scale: f64,
}

impl IllConditioning {
    /// Ten leading entries per hundred stay unscaled (at least one); the rest are scaled by 1e-3.
    pub fn for_output_dim(d_o: usize) -> Self {
        IllConditioning { unscaled_leading: ((d_o as f64 / 10.0).round() as usize).max(1), tail_scale: 1e-3 }
    }
}

/// The three preset problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    P1,
    P2,
    P3,
}

impl PowerQuadraticConfig {
    pub fn new(hessian_diagonals: Vec<Vec<f64>>, alphas: Vec<f64>, shifts: Vec<f64>) -> Result<Self> {
        let cfg = PowerQuadraticConfig { hessian_diagonals, alphas, shifts };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.alphas.len();
        if m == 0 || self.hessian_diagonals.len() != m || self.shifts.len() != m {
            return Err(AmooError::Config("power-quadratic config needs matching, nonempty H, alpha and shift lists".into()));
        }
        let d_o = self.hessian_diagonals[0].len();
        for (i, h) in self.hessian_diagonals.iter().enumerate() {
            if h.len() != d_o || d_o == 0 {
                return Err(AmooError::Config(format!("H_{i} has dimension {} but expected {d_o}", h.len())));
            }
            if h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(AmooError::Config(format!("H_{i} diagonal entries must be positive")));
            }
        }
        if let Some(i) = self.alphas.iter().position(|a| !(*a >= 1.0 && a.is_finite())) {
            return Err(AmooError::Config(format!("alpha_{i} = {} must be >= 1", self.alphas[i])));
        }
        if self.shifts.iter().any(|s| !s.is_finite()) {
            return Err(AmooError::Config("shifts must be finite".into()));
        }
        Ok(())
    }

    pub fn num_objectives(&self) -> usize {
        self.alphas.len()
    }

    pub fn output_dim(&self) -> usize {
        self.hessian_diagonals[0].len()
    }

    /// H = I, alpha in {1, 1.5, 2}, no shifts.
    pub fn p1(d_o: usize) -> Self {
        PowerQuadraticConfig {
            hessian_diagonals: vec![vec![1.0; d_o]; 3],
            alphas: vec![1.0, 1.5, 2.0],
            shifts: vec![0.0; 3],
        }
    }

    /// P1 with shifts {0, 0.05, -0.05}.
    pub fn p2(d_o: usize) -> Self {
        PowerQuadraticConfig { shifts: vec![0.0, 0.05, -0.05], ..Self::p1(d_o) }
    }

    /// `H_i = 0.5 diag(u_j + 1)` with the tail scaled down, shifts {0, 0.01, -0.01}.
    /// `u_j ~ Uniform[0, 1)` drawn independently per objective.
    pub fn p3(d_o: usize, split: IllConditioning, seed: u64) -> Self {
        let mut r = rng::stream(seed, rng::streams::HESSIAN);
        let hessian_diagonals = (0..3)
            .map(|_| {
                (0..d_o)
                    .map(|j| {
                        let u: f64 = r.gen_range(0.0..1.0);
                        let scale = if j < split.unscaled_leading { 1.0 } else { split.tail_scale };
                        0.5 * (u + 1.0) * scale
                    })
                    .collect()
            })
            .collect();
        PowerQuadraticConfig { hessian_diagonals, alphas: vec![1.0, 1.5, 2.0], shifts: vec![0.0, 0.01, -0.01] }
    }

    pub fn preset(preset: Preset, d_o: usize, seed: u64) -> Self {
        match preset {
            Preset::P1 => Self::p1(d_o),
            Preset::P2 => Self::p2(d_o),
            Preset::P3 => Self::p3(d_o, IllConditioning::for_output_dim(d_o), seed),
        }
    }

    fn q(&self, i: usize, d: &[f64]) -> f64 {
        let s = self.shifts[i];
        self.hessian_diagonals[i].iter().zip(d).map(|(h, v)| h * (v - s) * (v - s)).sum()
    }

    /// Adds `weight * d/dd q_i(d)^alpha_i` into `out`.
    fn add_output_gradient(&self, i: usize, d: &[f64], weight: f64, out: &mut [f64]) {
        let (alpha, s) = (self.alphas[i], self.shifts[i]);
        let q = self.q(i, d);
        let outer = if alpha == 1.0 {
            1.0
        } else if q == 0.0 {
            return;
        } else {
            alpha * q.powf(alpha - 1.0)
        };
        let c = weight * outer * 2.0;
        for ((o, h), v) in out.iter_mut().zip(&self.hessian_diagonals[i]).zip(d) {
            *o += c * h * (v - s);
        }
    }
}

/// Samples processed per parallel work item.
const SAMPLE_CHUNK: usize = 16;

/// The m power-quadratic losses over a sample range of a displacement map.
pub struct PowerQuadraticProblem {
    config: PowerQuadraticConfig,
    displacement: Arc<dyn Displacement>,
    samples: std::ops::Range<usize>,
    exec: Exec,
}

impl PowerQuadraticProblem {
    pub fn new(config: PowerQuadraticConfig, displacement: Arc<dyn Displacement>) -> Result<Self> {
        config.validate()?;
        if config.output_dim() != displacement.output_dim() {
            return Err(AmooError::Config(format!(
                "H has dimension {} but the displacement outputs {}",
                config.output_dim(),
                displacement.output_dim()
            )));
        }
        let samples = 0..displacement.num_samples();
        Ok(PowerQuadraticProblem { config, displacement, samples, exec: Exec::default() })
    }

    pub fn with_samples(mut self, samples: std::ops::Range<usize>) -> Result<Self> {
        if samples.is_empty() || samples.end > self.displacement.num_samples() {
            return Err(AmooError::Config(format!("sample range {samples:?} out of bounds")));
        }
        self.samples = samples;
        Ok(self)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &PowerQuadraticConfig {
        &self.config
    }

    fn m(&self) -> usize {
        self.config.num_objectives()
    }

    fn inv_count(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    /// Sum over the sample range of per-sample contributions, chunked in a
    /// fixed order so the result is independent of the execution policy.
    fn reduce_samples<T, F>(&self, zero: impl Fn() -> T + Sync, per_chunk: F, add: impl Fn(&mut T, T)) -> T
    where
        T: Send,
        F: Fn(std::ops::Range<usize>, &mut T) + Sync + Send,
    {
        let start = self.samples.start;
        map_reduce_chunks(
            self.exec,
            self.samples.len(),
            SAMPLE_CHUNK,
            |r| {
                let mut local = zero();
                per_chunk(start + r.start..start + r.end, &mut local);
                local
            },
            zero(),
            |mut a, b| {
                add(&mut a, b);
                a
            },
        )
    }

    fn values_impl(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.m();
        let sums = self.reduce_samples(
            || vec![0.0; m],
            |range, acc| {
                for s in range {
                    self.add_sample_values(&self.displacement.forward(theta, s), acc);
                }
            },
            |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
        );
        let inv = self.inv_count();
        sums.into_iter().map(|v| v * inv).collect()
    }

    fn add_sample_values(&self, d: &[f64], acc: &mut [f64]) {
        for (i, a) in acc.iter_mut().enumerate() {
            *a += self.config.q(i, d).powf(self.config.alphas[i]);
        }
    }

    fn output_cotangents(&self, d: &[f64], weight_rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        weight_rows
            .iter()
            .map(|w| {
                let mut c = vec![0.0; d.len()];
                for (i, &wi) in w.iter().enumerate() {
                    if wi != 0.0 {
                        self.config.add_output_gradient(i, d, wi, &mut c);
                    }
                }
                c
            })
            .collect()
    }

    #[allow(clippy::ptr_arg)] // passed where a `FnMut(&mut Vec<_>, Vec<_>)` is expected
    fn add_rows(a: &mut Vec<Vec<f64>>, b: Vec<Vec<f64>>) {
        for (x, y) in a.iter_mut().zip(b) {
            crate::linalg::axpy(1.0, &y, x);
        }
    }

    fn scale_rows(&self, mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let inv = self.inv_count();
        for g in &mut rows {
            g.iter_mut().for_each(|v| *v *= inv);
        }
        rows
    }

    /// One accumulator per row of `weight_rows`; row r gets `sum_i w_ri grad f_i`.
    fn gradients_impl(&self, theta: &[f64], weight_rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.displacement.param_dim();
        let rows = weight_rows.len();
        let out = self.reduce_samples(
            || vec![vec![0.0; n]; rows],
            |range, acc| {
                for s in range {
                    let cache = self.displacement.forward_cached(theta, s);
                    let cots = self.output_cotangents(&cache.output, weight_rows);
                    self.displacement.backward_cached(theta, s, &cache, &cots, acc);
                }
            },
            Self::add_rows,
        );
        self.scale_rows(out)
    }

    pub fn into_objective_set(self) -> ObjectiveSet {
        let shared = Arc::new(self);
        let objectives = (0..shared.m())
            .map(|i| Arc::new(PowerQuadraticObjective { problem: shared.clone(), index: i }) as Arc<dyn Objective>)
            .collect();
        ObjectiveSet::new(objectives).expect("validated dimensions").with_joint(shared)
    }
}

impl JointEvaluator for PowerQuadraticProblem {
    fn values(&self, x: &[f64]) -> Vec<f64> {
        self.values_impl(x)
    }

    fn linearize<'a>(&'a self, x: &'a [f64]) -> Box<dyn Linearization + 'a> {
        let m = self.m();
        let start = self.samples.start;
        let chunks = map_chunks(self.exec, self.samples.len(), SAMPLE_CHUNK, |r| {
            let mut sums = vec![0.0; m];
            let caches: Vec<ForwardCache> = (start + r.start..start + r.end)
                .map(|s| {
                    let cache = self.displacement.forward_cached(x, s);
                    self.add_sample_values(&cache.output, &mut sums);
                    cache
                })
                .collect();
            (start + r.start, caches, sums)
        });
        let mut values = vec![0.0; m];
        for (_, _, sums) in &chunks {
            values.iter_mut().zip(sums).for_each(|(a, b)| *a += b);
        }
        let inv = self.inv_count();
        values.iter_mut().for_each(|v| *v *= inv);
        let chunks = chunks.into_iter().map(|(first, caches, _)| (first, caches)).collect();
        Box::new(CachedPass { problem: self, theta: x, chunks, values })
    }

    fn weighted_gradient(&self, x: &[f64], weights: &[f64]) -> Vec<f64> {
        self.gradients_impl(x, &[weights.to_vec()]).pop().expect("one row")
    }

    fn gradients(&self, x: &[f64], m: usize) -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut w = vec![0.0; m];
                w[i] = 1.0;
                w
            })
            .collect();
        self.gradients_impl(x, &rows)
    }
}

/// Forward passes of every sample at one point, kept for repeated backward passes.
struct CachedPass<'a> {
    problem: &'a PowerQuadraticProblem,
    theta: &'a [f64],
    chunks: Vec<(usize, Vec<ForwardCache>)>,
    values: Vec<f64>,
}

impl Linearization for CachedPass<'_> {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn weighted_gradients(&self, weight_rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let p = self.problem;
        let n = p.displacement.param_dim();
        let rows = weight_rows.len();
        let out = map_reduce_chunks(
            p.exec,
            self.chunks.len(),
            1,
            |r| {
                let mut acc = vec![vec![0.0; n]; rows];
                for (first, caches) in &self.chunks[r] {
                    for (k, cache) in caches.iter().enumerate() {
                        let cots = p.output_cotangents(&cache.output, weight_rows);
                        p.displacement.backward_cached(self.theta, first + k, cache, &cots, &mut acc);
                    }
                }
                acc
            },
            vec![vec![0.0; n]; rows],
            |mut a, b| {
                PowerQuadraticProblem::add_rows(&mut a, b);
                a
            },
        );
        p.scale_rows(out)
    }
}

/// View of objective `index` of a shared [`PowerQuadraticProblem`].
pub struct PowerQuadraticObjective {
    problem: Arc<PowerQuadraticProblem>,
    index: usize,
}

impl Objective for PowerQuadraticObjective {
    fn dim(&self) -> usize {
        self.problem.displacement.param_dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.problem.values_impl(x)[self.index]
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.problem.m()];
        w[self.index] = 1.0;
        self.problem.weighted_gradient(x, &w)
    }
    fn optimal_value(&self) -> f64 {
        0.0
    }
    fn smoothness_bound(&self) -> Option<f64> {
        let cfg = &self.problem.config;
        (self.problem.displacement.is_identity() && cfg.alphas[self.index] == 1.0)
            .then(|| 2.0 * cfg.hessian_diagonals[self.index].iter().cloned().fold(0.0, f64::max))
    }
}

/// Objective set for `config` with `d = theta`.
pub fn make_power_quadratic_problem(config: PowerQuadraticConfig) -> Result<ObjectiveSet> {
    let d_o = config.output_dim();
    Ok(PowerQuadraticProblem::new(config, Arc::new(IdentityDisplacement { dim: d_o }))?.into_objective_set())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_identity_values() {
        let set = make_power_quadratic_problem(PowerQuadraticConfig::p1(2)).unwrap();
        assert_eq!(set.values(&[0.0, 0.0]).unwrap(), vec![0.0; 3]);
        // alpha = 2, H = I, d = (1, 1): (d^T d)^2 = 4
        assert_eq!(set.values(&[1.0, 1.0]).unwrap()[2], 4.0);
    }

    #[test]
    fn shifted_minimum_is_zero() {
        let set = make_power_quadratic_problem(PowerQuadraticConfig::p2(3)).unwrap();
        let v = set.values(&[0.05; 3]).unwrap();
        assert_eq!(v[1], 0.0);
        assert!(v[0] > 0.0 && v[2] > 0.0);
    }

    #[test]
    fn p3_hessian_split() {
        let split = IllConditioning { unscaled_leading: 10, tail_scale: 1e-3 };
        let cfg = PowerQuadraticConfig::p3(100, split, 0);
        for h in &cfg.hessian_diagonals {
            assert!(h[..10].iter().all(|v| (0.5..1.0).contains(v)));
            assert!(h[10..].iter().all(|v| (0.5e-3..1e-3).contains(v)));
        }
        assert_eq!(IllConditioning::for_output_dim(4).unscaled_leading, 1);
        assert_eq!(IllConditioning::for_output_dim(100).unscaled_leading, 10);
    }

    #[test]
    fn rejects_alpha_below_one() {
        let mut cfg = PowerQuadraticConfig::p1(2);
        cfg.alphas[1] = 0.5;
        assert!(matches!(make_power_quadratic_problem(cfg), Err(AmooError::Config(_))));
        let mut cfg = PowerQuadraticConfig::p1(2);
        cfg.hessian_diagonals[0][0] = 0.0;
        assert!(make_power_quadratic_problem(cfg).is_err());
    }

    #[test]
    fn joint_and_per_objective_gradients_agree() {
        let set = make_power_quadratic_problem(PowerQuadraticConfig::p2(3)).unwrap();
        let x = [0.3, -0.7, 0.2];
        let all = set.gradients(&x).unwrap();
        for (i, g) in all.iter().enumerate() {
            assert_eq!(g, &set.objective(i).gradient(&x));
        }
        let w = [0.2, 0.0, 1.5];
        let wg = set.weighted_gradient(&x, &w).unwrap();
        for j in 0..3 {
            let expect = 0.2 * all[0][j] + 1.5 * all[2][j];
            assert!((wg[j] - expect).abs() < 1e-14);
        }
    }
}

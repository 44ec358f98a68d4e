//! Lipschitz piecewise-linear objectives with a single common minimizer `c`:
//!
//! * `f_1(x) = sum_j a_j |x_j - c_j|`
//! * `f_2(x) = max_j |x_j - c_j|`
//! * `f_3(x) = |b^T (x - c)|`

use std::sync::Arc;

use rand::Rng as _;

use crate::error::{AmooError, Result};
use crate::linalg::{dot, norm, sign};
use crate::metric::argmax_lowest;
use crate::objective::{Objective, ObjectiveSet};
use crate::point::Point;
use crate::rng;

#[derive(Debug, Clone)]
pub struct WeightedL1 {
    pub center: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Objective for WeightedL1 {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).zip(&self.scales).map(|((v, c), a)| a * (v - c).abs()).sum()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).zip(&self.scales).map(|((v, c), a)| a * sign(v - c)).collect()
    }
    fn optimal_value(&self) -> f64 {
        0.0
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(norm(&self.scales))
    }
}

#[derive(Debug, Clone)]
pub struct LInf {
    pub center: Vec<f64>,
}

impl Objective for LInf {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(v, c)| (v - c).abs()).fold(0.0, f64::max)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let abs: Vec<f64> = x.iter().zip(&self.center).map(|(v, c)| (v - c).abs()).collect();
        let j = argmax_lowest(&abs);
        let mut g = vec![0.0; x.len()];
        g[j] = sign(x[j] - self.center[j]);
        g
    }
    fn optimal_value(&self) -> f64 {
        0.0
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct AbsLinear {
    pub center: Vec<f64>,
    pub direction: Vec<f64>,
}

impl Objective for AbsLinear {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.residual(x).abs()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = sign(self.residual(x));
        self.direction.iter().map(|b| s * b).collect()
    }
    fn optimal_value(&self) -> f64 {
        0.0
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(norm(&self.direction))
    }
}

impl AbsLinear {
    fn residual(&self, x: &[f64]) -> f64 {
        let shifted: Vec<f64> = x.iter().zip(&self.center).map(|(v, c)| v - c).collect();
        dot(&self.direction, &shifted)
    }
}

/// Three-objective piecewise-linear family with common minimizer `center`.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearFamily {
    pub center: Vec<f64>,
    pub l1_scales: Vec<f64>,
    pub direction: Vec<f64>,
}

impl PiecewiseLinearFamily {
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(AmooError::Config("piecewise family needs n >= 1".into()));
        }
        let mut r = rng::stream(seed, rng::streams::FAMILY);
        let center = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let l1_scales = (0..n).map(|_| r.gen_range(0.2..1.0) / (n as f64).sqrt()).collect();
        let direction = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        Ok(PiecewiseLinearFamily { center, l1_scales, direction })
    }

    pub fn objective_set(&self) -> ObjectiveSet {
        let objectives: Vec<Arc<dyn Objective>> = vec![
            Arc::new(WeightedL1 { center: self.center.clone(), scales: self.l1_scales.clone() }),
            Arc::new(LInf { center: self.center.clone() }),
            Arc::new(AbsLinear { center: self.center.clone(), direction: self.direction.clone() }),
        ];
        let c = Point::new(self.center.clone()).expect("finite center");
        ObjectiveSet::new(objectives).expect("consistent dimensions").with_witness(Arc::new(move |_| c.clone()))
    }
}

/// Euclidean distances to nearby centers: `f_i(x) = ||x - c_i||`,
/// `||c_i - c|| <= eps`. No common minimizer, but `c` is in C_eps.
#[derive(Debug, Clone)]
pub struct EuclideanDistance {
    pub center: Vec<f64>,
}

impl Objective for EuclideanDistance {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        crate::linalg::dist(x, &self.center)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = crate::linalg::dist(x, &self.center);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter().zip(&self.center).map(|(v, c)| (v - c) / r).collect()
    }
    fn optimal_value(&self) -> f64 {
        0.0
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct PerturbedNormFamily {
    pub common: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl PerturbedNormFamily {
    /// Centers on the sphere of radius `eps` around a random common point.
    pub fn random(m: usize, n: usize, eps: f64, seed: u64) -> Result<Self> {
        if m < 2 || n == 0 || !(eps > 0.0) {
            return Err(AmooError::Config(format!(
                "perturbed family needs m >= 2, n >= 1, eps > 0; got m={m}, n={n}, eps={eps}"
            )));
        }
        let mut r = rng::stream(seed, rng::streams::FAMILY);
        let common: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let centers = (0..m)
            .map(|_| {
                let mut d: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
                let len = norm(&d).max(1e-12);
                d.iter_mut().for_each(|v| *v *= eps / len);
                common.iter().zip(&d).map(|(c, v)| c + v).collect()
            })
            .collect();
        Ok(PerturbedNormFamily { common, centers, epsilon: eps })
    }

    pub fn objective_set(&self) -> ObjectiveSet {
        let objectives = self
            .centers
            .iter()
            .map(|c| Arc::new(EuclideanDistance { center: c.clone() }) as Arc<dyn Objective>)
            .collect();
        let c = Point::new(self.common.clone()).expect("finite center");
        ObjectiveSet::new(objectives)
            .expect("consistent dimensions")
            .with_alignment_epsilon(self.epsilon)
            .expect("positive epsilon")
            .with_witness(Arc::new(move |_| c.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{is_in_epsilon_set, max_gap};

    #[test]
    fn piecewise_center_is_common_minimizer() {
        let fam = PiecewiseLinearFamily::random(5, 3).unwrap();
        let set = fam.objective_set();
        let x = Point::new(vec![0.0; 5]).unwrap();
        let c = set.witness(&x).unwrap();
        assert_eq!(max_gap(&set, &c).unwrap(), 0.0);
        assert!(max_gap(&set, &x).unwrap() > 0.0);
    }

    #[test]
    fn perturbed_common_point_is_eps_optimal_only() {
        let fam = PerturbedNormFamily::random(3, 4, 0.05, 1).unwrap();
        let set = fam.objective_set();
        let c = set.witness(&Point::zeros(4)).unwrap();
        let mg = max_gap(&set, &c).unwrap();
        assert!((mg - 0.05).abs() < 1e-12);
        assert!(is_in_epsilon_set(&set, &c, 0.05 + 1e-12).unwrap());
        assert!(!is_in_epsilon_set(&set, &c, 0.04).unwrap());
    }
}

//! Diagonal quadratics `f_i(x) = 1/2 x^T D_i x` sharing a minimizer set.

use std::sync::Arc;

use rand::Rng as _;

use crate::error::{AmooError, Result};
use crate::objective::{Objective, ObjectiveSet};
use crate::point::Point;
use crate::rng;

#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    pub diag: Vec<f64>,
}

impl Objective for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.diag.iter().zip(x).map(|(d, v)| d * v * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(x).map(|(d, v)| d * v).collect()
    }
    fn optimal_value(&self) -> f64 {
        0.0
    }
    fn smoothness_bound(&self) -> Option<f64> {
        Some(self.diag.iter().cloned().fold(0.0, f64::max))
    }
}

/// m diagonal PSD quadratics. Coordinates with zero curvature in every
/// objective form the common minimizer set.
#[derive(Debug, Clone)]
pub struct QuadraticFamily {
    pub diagonals: Vec<Vec<f64>>,
}

impl QuadraticFamily {
    pub fn new(diagonals: Vec<Vec<f64>>) -> Result<Self> {
        let Some(n) = diagonals.first().map(|d| d.len()) else {
            return Err(AmooError::Config("quadratic family needs at least one objective".into()));
        };
        if n == 0 || diagonals.iter().any(|d| d.len() != n) {
            return Err(AmooError::Config("quadratic diagonals must share a nonzero length".into()));
        }
        if diagonals.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(AmooError::Config("quadratic diagonals must be finite and nonnegative".into()));
        }
        Ok(QuadraticFamily { diagonals })
    }

    /// Random aligned family: the last `null_dims` coordinates are flat in
    /// every objective; every other coordinate is curved in at least one.
    pub fn random_aligned(m: usize, n: usize, null_dims: usize, seed: u64) -> Result<Self> {
        if m == 0 || null_dims >= n {
            return Err(AmooError::Config(format!(
                "need m >= 1 and null_dims < n, got m={m}, n={n}, null_dims={null_dims}"
            )));
        }
        let mut r = rng::stream(seed, rng::streams::FAMILY);
        let active = n - null_dims;
        let mut diagonals = vec![vec![0.0; n]; m];
        for j in 0..active {
            let owner = r.gen_range(0..m);
            for (i, d) in diagonals.iter_mut().enumerate() {
                if i == owner || r.gen_bool(0.5) {
                    d[j] = r.gen_range(0.1..2.0);
                }
            }
        }
        Self::new(diagonals)
    }

    pub fn dim(&self) -> usize {
        self.diagonals[0].len()
    }

    /// Coordinates curved in some objective; zero on the common minimizer set.
    pub fn curved_coordinates(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.diagonals.iter().any(|d| d[j] > 0.0)).collect()
    }

    pub fn objective_set(&self) -> ObjectiveSet {
        let objectives = self
            .diagonals
            .iter()
            .map(|d| Arc::new(DiagonalQuadratic { diag: d.clone() }) as Arc<dyn Objective>)
            .collect();
        let curved = self.curved_coordinates();
        ObjectiveSet::new(objectives).expect("validated dimensions").with_witness(Arc::new(move |x: &Point| {
            let mut p = x.as_slice().to_vec();
            for &j in &curved {
                p[j] = 0.0;
            }
            Point::new(p).expect("finite projection")
        }))
    }
}

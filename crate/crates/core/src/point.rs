use serde::{Deserialize, Serialize};

use crate::error::{AmooError, Result};

/// A point in R^n with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(AmooError::Config("point dimension must be at least 1".into()));
        }
        crate::error::ensure_all_finite("point", &coords)?;
        Ok(Point(coords))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "point dimension must be at least 1");
        Point(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// `self - scale * direction`, rejecting non-finite results.
    pub fn step(&self, scale: f64, direction: &[f64]) -> Result<Point> {
        if direction.len() != self.dim() {
            return Err(AmooError::Config(format!(
                "step direction has dimension {} but point has {}",
                direction.len(),
                self.dim()
            )));
        }
        let coords: Vec<f64> = self.0.iter().zip(direction).map(|(x, d)| x - scale * d).collect();
        crate::error::ensure_all_finite("iterate", &coords)?;
        Ok(Point(coords))
    }

    pub fn distance(&self, other: &Point) -> f64 {
        crate::linalg::dist(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Nonnegative weights over the m objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(AmooError::Numeric(format!(
                "weight {i} must be finite and nonnegative, got {}",
                weights[i]
            )));
        }
        Ok(WeightVector(weights))
    }

    pub fn zeros(m: usize) -> Self {
        WeightVector(vec![0.0; m])
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector(vec![1.0 / m as f64; m])
    }

    pub fn one_hot(m: usize, index: usize) -> Self {
        let mut w = vec![0.0; m];
        w[index] = 1.0;
        WeightVector(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|w| *w == 0.0)
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(WeightVector::new(vec![0.5, -1e-3]).is_err());
    }

    #[test]
    fn step_subtracts_scaled_direction() {
        let p = Point::new(vec![1.0, 2.0]).unwrap();
        let q = p.step(0.5, &[2.0, -2.0]).unwrap();
        assert_eq!(q.as_slice(), &[0.0, 3.0]);
        assert!(p.step(1.0, &[1.0]).is_err());
        assert!(p.step(f64::MAX, &[f64::MAX, 0.0]).is_err());
    }
}

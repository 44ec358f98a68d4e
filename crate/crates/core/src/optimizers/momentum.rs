use crate::error::{AmooError, Result};
use crate::point::WeightVector;

/// `(1 - beta) prev + beta new`, elementwise.
pub fn apply_momentum(prev: &WeightVector, new: &WeightVector, beta: f64) -> Result<WeightVector> {
    if prev.len() != new.len() {
        return Err(AmooError::Usage(format!("weight lengths differ: {} vs {}", prev.len(), new.len())));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(AmooError::Usage(format!("momentum must lie in [0, 1), got {beta}")));
    }
    WeightVector::new(prev.as_slice().iter().zip(new.as_slice()).map(|(p, n)| (1.0 - beta) * p + beta * n).collect())
}

//! The `f_i(x) = |x_i|` family on which equal weighting with Polyak steps
//! converges at a rate that grows with the number of objectives.

use std::sync::Arc;

use crate::error::{AmooError, Result};
use crate::linalg::sign;
use crate::objective::{Objective, ObjectiveSet};
use crate::point::Point;

/// `|x_index|` on R^n.
#[derive(Debug, Clone)]
pub struct AbsCoordinate {
    pub index: usize,
    pub dim: usize,
}

impl Objective for AbsCoordinate {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[self.index].abs()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        g[self.index] = sign(x[self.index]);
        g
    }
    fn optimal_value(&self) -> f64 {
        0.0
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundProblem {
    pub m: usize,
    pub n: usize,
    pub eps_param: f64,
}

impl LowerBoundProblem {
    pub fn new(m: usize, n: usize, eps_param: f64) -> Result<Self> {
        if m < 2 {
            return Err(AmooError::Config(format!("lower-bound problem needs m >= 2, got {m}")));
        }
        if n < m {
            return Err(AmooError::Config(format!("lower-bound problem needs n >= m, got n={n}, m={m}")));
        }
        if !(eps_param > 0.0 && eps_param.is_finite()) {
            return Err(AmooError::Config(format!("eps must be positive, got {eps_param}")));
        }
        Ok(LowerBoundProblem { m, n, eps_param })
    }

    /// `a = (m - 1) eps`.
    pub fn a(&self) -> f64 {
        (self.m - 1) as f64 * self.eps_param
    }

    /// `(a, eps, ..., eps, 0, ..., 0)` with m-1 copies of eps.
    pub fn start(&self) -> Point {
        let mut x = vec![0.0; self.n];
        x[0] = self.a();
        x[1..self.m].iter_mut().for_each(|v| *v = self.eps_param);
        Point::new(x).expect("finite start")
    }

    pub fn objective_set(&self) -> ObjectiveSet {
        let (m, n) = (self.m, self.n);
        let objectives = (0..m)
            .map(|index| Arc::new(AbsCoordinate { index, dim: n }) as Arc<dyn Objective>)
            .collect();
        ObjectiveSet::new(objectives).expect("consistent dimensions").with_witness(Arc::new(move |x: &Point| {
            let mut p = x.as_slice().to_vec();
            p[..m].iter_mut().for_each(|v| *v = 0.0);
            Point::new(p).expect("finite projection")
        }))
    }

    /// Iterate k (1-based) of equal-weight Polyak descent from the canonical start.
    pub fn closed_form_iterate(&self, k: usize) -> Point {
        let mut x = vec![0.0; self.n];
        x[0] = closed_form_first_coordinate(self.m, self.a(), k);
        let other = closed_form_other_coordinate(self.m, self.eps_param, k);
        x[1..self.m].iter_mut().for_each(|v| *v = other);
        Point::new(x).expect("finite closed form")
    }
}

/// Objective set and canonical start point for `(m, n, eps)`.
pub fn make_lower_bound_problem(m: usize, n: usize, eps_param: f64) -> Result<(ObjectiveSet, Point)> {
    let p = LowerBoundProblem::new(m, n, eps_param)?;
    Ok((p.objective_set(), p.start()))
}

/// `x_{k,1} = a (1 - 2/m)^(k-1)`.
pub fn closed_form_first_coordinate(m: usize, a: f64, k: usize) -> f64 {
    assert!(m >= 2 && k >= 1);
    a * (1.0 - 2.0 / m as f64).powi((k - 1) as i32)
}

/// `x_{k,i} = eps (-1)^(k-1) (1 - 2/m)^(k-1)` for `1 < i <= m`.
pub fn closed_form_other_coordinate(m: usize, eps_param: f64, k: usize) -> f64 {
    assert!(m >= 2 && k >= 1);
    let alt = if (k - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    eps_param * alt * (1.0 - 2.0 / m as f64).powi((k - 1) as i32)
}

/// Lower bound on the equal-weight Polyak max gap after K steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundValue {
    pub value: f64,
    /// False outside `m/4 <= K <= m`. Below m/4 the step
    /// `m a / (m + 2K) >= sqrt(m) a / (3 sqrt(K))` no longer holds.
    pub within_validity: bool,
}

/// `sqrt(m - 1) / 3 * G * dist / sqrt(K)`.
pub fn ew_lower_bound_value(m: usize, lipschitz: f64, dist: f64, iterations: usize) -> Result<LowerBoundValue> {
    if m < 2 || iterations == 0 {
        return Err(AmooError::Usage(format!("need m >= 2 and K >= 1, got m={m}, K={iterations}")));
    }
    if !(dist > 0.0) {
        return Err(AmooError::Usage(format!("distance must be positive, got {dist}")));
    }
    Ok(LowerBoundValue {
        value: ((m - 1) as f64).sqrt() / 3.0 * lipschitz * dist / (iterations as f64).sqrt(),
        within_validity: iterations <= m && 4 * iterations >= m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_starts() {
        let (f, x) = make_lower_bound_problem(4, 4, 1.0).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 1.0, 1.0, 1.0]);
        assert!(f.optimal_values().iter().all(|v| *v == 0.0));
        assert_eq!(f.lipschitz_bound(), Some(1.0));

        let (_, x) = make_lower_bound_problem(2, 2, 1.0).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);

        let (_, x) = make_lower_bound_problem(16, 20, 0.1).unwrap();
        assert!((x.coord(0) - 1.5).abs() < 1e-15);
        assert!(x.as_slice()[1..16].iter().all(|v| *v == 0.1));
        assert!(x.as_slice()[16..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_lower_bound_problem(4, 3, 1.0).is_err());
        assert!(make_lower_bound_problem(4, 4, 0.0).is_err());
        assert!(make_lower_bound_problem(4, 4, -1.0).is_err());
        assert!(make_lower_bound_problem(1, 4, 1.0).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_first_coordinate(4, 3.0, 1), 3.0);
        assert_eq!(closed_form_first_coordinate(4, 3.0, 2), 1.5);
        assert_eq!(closed_form_first_coordinate(2, 1.0, 2), 0.0);
        assert_eq!(closed_form_other_coordinate(4, 1.0, 2), -0.5);
    }

    #[test]
    fn lower_bound_value_examples() {
        let v = ew_lower_bound_value(10, 1.0, 1.0, 9).unwrap();
        assert!((v.value - 1.0 / 3.0).abs() < 1e-15 && v.within_validity);
        let v = ew_lower_bound_value(2, 1.0, 1.0, 1).unwrap();
        assert!((v.value - 1.0 / 3.0).abs() < 1e-15);
        let v = ew_lower_bound_value(65, 1.0, 2.0, 64).unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-15);
        assert!(!ew_lower_bound_value(4, 1.0, 1.0, 5).unwrap().within_validity);
        assert!(!ew_lower_bound_value(16, 1.0, 1.0, 3).unwrap().within_validity);
        assert!(ew_lower_bound_value(16, 1.0, 1.0, 4).unwrap().within_validity);
    }

    #[test]
    fn witness_projects_first_m_coordinates() {
        let p = LowerBoundProblem::new(3, 5, 0.5).unwrap();
        let x = Point::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let w = p.objective_set().witness(&x).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.0, 0.0, 4.0, 5.0]);
    }
}

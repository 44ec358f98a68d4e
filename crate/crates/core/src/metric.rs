//! The maximum-gap metric and epsilon-set membership.

use crate::error::{AmooError, Result};
use crate::objective::ObjectiveSet;
use crate::point::Point;

/// `MG(x) = max_i f_i(x) - f_i^*`.
pub fn max_gap(set: &ObjectiveSet, x: &Point) -> Result<f64> {
    let gaps = set.gaps(x.as_slice())?;
    Ok(gaps.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest index attaining the largest value.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the objective with the largest gap; ties go to the lowest index.
pub fn select_max_gap_index(set: &ObjectiveSet, x: &Point) -> Result<usize> {
    Ok(argmax_lowest(&set.gaps(x.as_slice())?))
}

/// Whether `x` lies in C_eps, i.e. every gap is at most `eps`.
pub fn is_in_epsilon_set(set: &ObjectiveSet, x: &Point, eps: f64) -> Result<bool> {
    if !(eps >= 0.0) {
        return Err(AmooError::Usage(format!("epsilon must be >= 0, got {eps}")));
    }
    Ok(set.gaps(x.as_slice())?.iter().all(|g| *g <= eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{FnObjective, Objective};
    use crate::problems::lower_bound::make_lower_bound_problem;
    use std::sync::Arc;

    fn abs_pair() -> ObjectiveSet {
        let objs: Vec<Arc<dyn Objective>> = (0..2)
            .map(|i| {
                Arc::new(FnObjective::new(2, 0.0, move |x: &[f64]| x[i].abs(), move |x: &[f64]| {
                    let mut g = vec![0.0; 2];
                    g[i] = crate::linalg::sign(x[i]);
                    g
                })) as Arc<dyn Objective>
            })
            .collect();
        ObjectiveSet::new(objs).unwrap()
    }

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn max_gap_examples() {
        let sq: Arc<dyn Objective> = Arc::new(FnObjective::new(1, 0.0, |x| x[0] * x[0], |x| vec![2.0 * x[0]]));
        let abs: Arc<dyn Objective> = Arc::new(FnObjective::new(1, 0.0, |x| x[0].abs(), |x| vec![x[0].signum()]));
        let quart: Arc<dyn Objective> = Arc::new(FnObjective::new(1, 0.0, |x| x[0].powi(4), |x| vec![4.0 * x[0].powi(3)]));
        let f = ObjectiveSet::new(vec![sq.clone(), abs]).unwrap();
        assert_eq!(max_gap(&f, &p(&[0.0])).unwrap(), 0.0);
        let f = ObjectiveSet::new(vec![sq, quart]).unwrap();
        assert_eq!(max_gap(&f, &p(&[2.0])).unwrap(), 16.0);

        let (lb, start) = make_lower_bound_problem(4, 4, 1.0).unwrap();
        assert_eq!(max_gap(&lb, &start).unwrap(), 3.0);
        assert_eq!(select_max_gap_index(&lb, &start).unwrap(), 0);
    }

    #[test]
    fn argmax_tie_break_is_lowest_index() {
        assert_eq!(argmax_lowest(&[0.5, 0.5, 0.1]), 0);
        assert_eq!(argmax_lowest(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax_lowest(&[0.1, 0.9, 0.9]), 1);
    }

    #[test]
    fn epsilon_membership() {
        let f = abs_pair();
        assert!(is_in_epsilon_set(&f, &p(&[0.0, 0.0]), 0.0).unwrap());
        assert!(is_in_epsilon_set(&f, &p(&[0.04, -0.03]), 0.05).unwrap());
        assert!(!is_in_epsilon_set(&f, &p(&[0.04, -0.03]), 0.02).unwrap());
        assert!(is_in_epsilon_set(&f, &p(&[0.0, 0.0]), -1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let f = abs_pair();
        assert!(matches!(max_gap(&f, &p(&[1.0])), Err(AmooError::Config(_))));
    }

    #[test]
    fn non_finite_value_is_numeric_error() {
        let bad: Arc<dyn Objective> = Arc::new(FnObjective::new(1, 0.0, |_| f64::NAN, |_| vec![0.0]));
        let f = ObjectiveSet::new(vec![bad]).unwrap();
        assert!(matches!(max_gap(&f, &p(&[1.0])), Err(AmooError::Numeric(_))));
    }
}

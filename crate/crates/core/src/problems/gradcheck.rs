use crate::error::{AmooError, Result};
use crate::objective::Objective;

/// Largest per-coordinate relative error between the analytic gradient and
/// central finite differences with step `h`:
/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn gradient_check(obj: &dyn Objective, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(AmooError::Usage(format!("finite-difference step must be positive, got {h}")));
    }
    let analytic = obj.gradient(x);
    if analytic.len() != x.len() {
        return Err(AmooError::Config("gradient dimension does not match point".into()));
    }
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for (j, a) in analytic.iter().enumerate() {
        let orig = probe[j];
        probe[j] = orig + h;
        let fp = obj.value(&probe);
        probe[j] = orig - h;
        let fm = obj.value(&probe);
        probe[j] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        if !numeric.is_finite() || !a.is_finite() {
            return Err(AmooError::Numeric(format!("non-finite derivative at coordinate {j}")));
        }
        worst = worst.max((a - numeric).abs() / numeric.abs().max(1.0));
    }
    Ok(worst)
}

/// Finite-difference step used by the checks.
pub const DEFAULT_STEP: f64 = 1e-5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;

    #[test]
    fn half_squared_norm_is_exact_to_fd_accuracy() {
        let f = FnObjective::new(4, 0.0, |x| 0.5 * crate::linalg::norm_sq(x), |x| x.to_vec());
        let err = gradient_check(&f, &[0.3, -1.2, 4.0, 0.0], DEFAULT_STEP).unwrap();
        assert!(err <= 1e-7, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let f = FnObjective::new(1, 0.0, |x| x[0] * x[0], |x| vec![x[0]]);
        assert!(gradient_check(&f, &[1.0], DEFAULT_STEP).unwrap() > 0.5);
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        let f = FnObjective::new(1, 0.0, |x| x[0].ln(), |x| vec![1.0 / x[0]]);
        assert!(gradient_check(&f, &[1.0], 0.0).is_err());
        assert!(matches!(gradient_check(&f, &[0.0], DEFAULT_STEP), Err(AmooError::Numeric(_))));
    }
}

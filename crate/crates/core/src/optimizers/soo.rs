//! Single-objective optimizers driven by MG-AMOO.

use crate::error::{AmooError, Result};
use crate::linalg::norm_sq;
use crate::objective::{Objective, EVAL_TOLERANCE};
use crate::point::Point;

/// Squared gradient norms below this count as zero.
pub const ZERO_GRADIENT_SQ: f64 = 1e-28;

/// A stepping rule `x_{k+1} = x_k - eta_k grad f(x_k)`.
pub trait SooStep: Send {
    /// Step size for the `k`-th call, given the gap `f(x_k) - f^*`, the squared
    /// gradient norm and the slack `eps` (0 in exact mode).
    fn step_size(&mut self, k: usize, gap: f64, grad_norm_sq: f64, eps: f64) -> Result<f64>;

    fn name(&self) -> &'static str;

    fn step(&mut self, f: &dyn Objective, x: &Point, k: usize) -> Result<Point> {
        let g = f.gradient(x.as_slice());
        let gap = f.value(x.as_slice()) - f.optimal_value();
        let eta = self.step_size(k, gap, norm_sq(&g), 0.0)?;
        x.step(eta, &g)
    }
}

/// `eta = max(gap - eps, 0) / |g|^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Polyak;

impl SooStep for Polyak {
    fn step_size(&mut self, k: usize, gap: f64, grad_norm_sq: f64, eps: f64) -> Result<f64> {
        let excess = (gap - eps).max(0.0);
        if grad_norm_sq <= ZERO_GRADIENT_SQ {
            if excess > EVAL_TOLERANCE {
                return Err(AmooError::Stall { step: k, gap, grad_norm: grad_norm_sq.sqrt() });
            }
            return Ok(0.0);
        }
        Ok(excess / grad_norm_sq)
    }

    fn name(&self) -> &'static str {
        "polyak"
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Gd {
    pub step: f64,
}

impl SooStep for Gd {
    fn step_size(&mut self, _k: usize, _gap: f64, _grad_norm_sq: f64, _eps: f64) -> Result<f64> {
        Ok(self.step)
    }

    fn name(&self) -> &'static str {
        "gd"
    }
}

/// Online gradient descent with `eta_t = D / (G sqrt(t))`, `t` counting its own calls.
#[derive(Debug, Clone, Copy)]
pub struct Ogd {
    pub distance: f64,
    pub lipschitz: f64,
    calls: usize,
}

impl Ogd {
    pub fn new(distance: f64, lipschitz: f64) -> Result<Self> {
        if !(distance > 0.0 && lipschitz > 0.0) {
            return Err(AmooError::Config(format!(
                "OGD needs positive D and G, got D={distance}, G={lipschitz}"
            )));
        }
        Ok(Ogd { distance, lipschitz, calls: 0 })
    }

    pub fn schedule(&self, t: usize) -> f64 {
        self.distance / (self.lipschitz * (t as f64).sqrt())
    }
}

impl SooStep for Ogd {
    fn step_size(&mut self, _k: usize, _gap: f64, _grad_norm_sq: f64, _eps: f64) -> Result<f64> {
        self.calls += 1;
        Ok(self.schedule(self.calls))
    }

    fn name(&self) -> &'static str {
        "ogd"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;

    #[test]
    fn polyak_on_abs() {
        let f = FnObjective::new(1, 0.0, |x| x[0].abs(), |x| vec![crate::linalg::sign(x[0])]);
        let x = Point::new(vec![2.0]).unwrap();
        assert_eq!(Polyak.step(&f, &x, 1).unwrap().as_slice(), &[0.0]);
        assert_eq!(Polyak.step_size(1, 0.3, 1.0, 0.0).unwrap(), 0.3);
        assert!((Polyak.step_size(1, 0.3, 1.0, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(Polyak.step_size(1, 0.05, 1.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn polyak_stalls_on_zero_gradient_with_gap() {
        assert!(matches!(Polyak.step_size(3, 1.0, 0.0, 0.0), Err(AmooError::Stall { step: 3, .. })));
        assert_eq!(Polyak.step_size(3, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(Polyak.step_size(3, 0.05, 0.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn gd_half_over_beta() {
        let beta = 3.0;
        let f = FnObjective::new(1, 0.0, move |x| 0.5 * beta * x[0] * x[0], move |x| vec![beta * x[0]]);
        let mut gd = Gd { step: 1.0 / (2.0 * beta) };
        let x = gd.step(&f, &Point::new(vec![1.0]).unwrap(), 1).unwrap();
        assert!((x.coord(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ogd_schedule() {
        let mut ogd = Ogd::new(1.0, 1.0).unwrap();
        let etas: Vec<f64> = (1..=4).map(|k| ogd.step_size(k, 0.0, 1.0, 0.0).unwrap()).collect();
        let want = [1.0, std::f64::consts::FRAC_1_SQRT_2, 1.0 / 3f64.sqrt(), 0.5];
        for (a, b) in etas.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(Ogd::new(0.0, 1.0).is_err());
    }
}

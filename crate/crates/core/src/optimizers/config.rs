use serde::{Deserialize, Serialize};

use crate::error::{AmooError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    EwPolyak,
    EwGd,
    Pamoo,
    MgamooPolyak,
    MgamooGd,
    MgamooOgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::EwPolyak,
        Algorithm::EwGd,
        Algorithm::Pamoo,
        Algorithm::MgamooPolyak,
        Algorithm::MgamooGd,
        Algorithm::MgamooOgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::EwPolyak => "EW_POLYAK",
            Algorithm::EwGd => "EW_GD",
            Algorithm::Pamoo => "PAMOO",
            Algorithm::MgamooPolyak => "MGAMOO_POLYAK",
            Algorithm::MgamooGd => "MGAMOO_GD",
            Algorithm::MgamooOgd => "MGAMOO_OGD",
        }
    }

    pub fn is_mgamoo(self) -> bool {
        matches!(self, Algorithm::MgamooPolyak | Algorithm::MgamooGd | Algorithm::MgamooOgd)
    }

    pub fn is_ew(self) -> bool {
        matches!(self, Algorithm::EwPolyak | Algorithm::EwGd)
    }

    pub fn uses_gd_step(self) -> bool {
        matches!(self, Algorithm::EwGd | Algorithm::MgamooGd)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn one() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Settings for one run. Options that do not apply to `algorithm` must be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub epsilon: f64,
    /// Weight on the newest selection in `w <- (1 - b) w + b e_I` (MG-AMOO only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    /// D in the OGD schedule `D / (G sqrt(k))`; defaults to the distance to the witness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ogd_distance: Option<f64>,
    /// Constant step; defaults to `1 / (2 beta)` when the objectives are smooth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub stop_on_epsilon: bool,
    /// Optimal value of the equal-weight average; defaults to the mean of the f_i^*.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ew_optimal_value: Option<f64>,
    /// Multiplies every step. Theory runs use 1.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub learning_rate: f64,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, iterations: usize) -> Self {
        RunConfig {
            algorithm,
            iterations,
            epsilon: 0.0,
            momentum: None,
            ogd_distance: None,
            gd_step: None,
            stop_on_epsilon: false,
            ew_optimal_value: None,
            learning_rate: 1.0,
        }
    }

    pub fn with_epsilon(mut self, eps: f64, stop: bool) -> Self {
        self.epsilon = eps;
        self.stop_on_epsilon = stop;
        self
    }

    pub fn with_momentum(mut self, beta: f64) -> Self {
        self.momentum = Some(beta);
        self
    }

    pub fn with_gd_step(mut self, step: f64) -> Self {
        self.gd_step = Some(step);
        self
    }

    pub fn with_ogd_distance(mut self, d: f64) -> Self {
        self.ogd_distance = Some(d);
        self
    }

    pub fn with_ew_optimal_value(mut self, v: f64) -> Self {
        self.ew_optimal_value = Some(v);
        self
    }

    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let alg = self.algorithm;
        let bad = |what: &str| Err(AmooError::Config(format!("{what} does not apply to {alg}")));
        if self.iterations == 0 {
            return Err(AmooError::Config("iterations must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(AmooError::Config(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if self.stop_on_epsilon && self.epsilon == 0.0 {
            return Err(AmooError::Config("stop_on_epsilon needs epsilon > 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AmooError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if let Some(b) = self.momentum {
            if !alg.is_mgamoo() {
                return bad("momentum");
            }
            if !(0.0..1.0).contains(&b) {
                return Err(AmooError::Config(format!("momentum must lie in [0, 1), got {b}")));
            }
        }
        if let Some(d) = self.ogd_distance {
            if alg != Algorithm::MgamooOgd {
                return bad("ogd_distance");
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(AmooError::Config(format!("ogd_distance must be positive, got {d}")));
            }
        }
        if let Some(s) = self.gd_step {
            if !alg.uses_gd_step() {
                return bad("gd_step");
            }
            if !(s >= 0.0 && s.is_finite()) {
                return Err(AmooError::Config(format!("gd_step must be finite and >= 0, got {s}")));
            }
        }
        if self.ew_optimal_value.is_some() && !alg.is_ew() {
            return bad("ew_optimal_value");
        }
        if self.stop_on_epsilon && alg.is_ew() {
            return bad("stop_on_epsilon");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_options_for_other_algorithms() {
        assert!(RunConfig::new(Algorithm::Pamoo, 10).with_momentum(0.9).validate().is_err());
        assert!(RunConfig::new(Algorithm::EwPolyak, 10).with_gd_step(0.1).validate().is_err());
        assert!(RunConfig::new(Algorithm::MgamooPolyak, 10).with_ogd_distance(1.0).validate().is_err());
        assert!(RunConfig::new(Algorithm::MgamooGd, 10).with_ew_optimal_value(0.0).validate().is_err());
        assert!(RunConfig::new(Algorithm::MgamooPolyak, 10).with_momentum(1.0).validate().is_err());
        assert!(RunConfig::new(Algorithm::MgamooPolyak, 0).validate().is_err());
        assert!(RunConfig::new(Algorithm::Pamoo, 5).with_epsilon(0.0, true).validate().is_err());
    }

    #[test]
    fn accepts_matching_options() {
        RunConfig::new(Algorithm::MgamooPolyak, 10).with_momentum(0.95).validate().unwrap();
        RunConfig::new(Algorithm::MgamooOgd, 10).with_ogd_distance(2.0).validate().unwrap();
        RunConfig::new(Algorithm::EwGd, 10).with_gd_step(0.0).validate().unwrap();
        RunConfig::new(Algorithm::Pamoo, 10).with_epsilon(0.05, true).validate().unwrap();
    }
}

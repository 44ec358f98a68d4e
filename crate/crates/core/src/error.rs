use thiserror::Error;

pub type Result<T> = std::result::Result<T, AmooError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmooError {
    /// Inconsistent problem or run configuration (dimensions, missing constants, bad ranges).
    #[error("configuration error: {0}")]
    Config(String),

    /// A NaN or infinity appeared where a finite value is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The caller violated an operation precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// Zero (sub)gradient while the gap is still positive.
    #[error("polyak step stalled at step {step}: gap {gap:e} with gradient norm {grad_norm:e}")]
    Stall { step: usize, gap: f64, grad_norm: f64 },

    #[error("run diverged at step {step}: max gap {max_gap:e} exceeds {limit:e}")]
    Divergence { step: usize, max_gap: f64, limit: f64 },

    /// The weight subproblem has a zero-curvature direction with positive gain.
    #[error("weight subproblem is unbounded along index {index}")]
    Unbounded { index: usize },
}

pub(crate) fn ensure_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(AmooError::Numeric(format!("{what} is not finite ({v})")))
    }
}

pub(crate) fn ensure_all_finite(what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(AmooError::Numeric(format!("{what}[{i}] is not finite ({})", v[i]))),
    }
}

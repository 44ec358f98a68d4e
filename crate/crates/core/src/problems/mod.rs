//! Objective families with analytically known optimal values.

pub mod dataset_io;
pub mod distillation;
pub mod lower_bound;
pub mod network;
pub mod piecewise;
pub mod power_quadratic;
pub mod quadratic;

mod gradcheck;

pub use distillation::{make_distillation_problem, Dataset, DistillationConfig, DistillationProblem};
pub use gradcheck::{gradient_check, DEFAULT_STEP as FD_STEP};
pub use lower_bound::{
    closed_form_first_coordinate, closed_form_other_coordinate, ew_lower_bound_value, make_lower_bound_problem,
    LowerBoundProblem, LowerBoundValue,
};
pub use piecewise::{PerturbedNormFamily, PiecewiseLinearFamily};
pub use power_quadratic::{make_power_quadratic_problem, IllConditioning, PowerQuadraticConfig, Preset};
pub use quadratic::QuadraticFamily;

//! Aligned multi-objective optimization: objectives sharing a common
//! minimizer, the max-gap metric, and the weighting algorithms that drive it
//! to zero (equal weights, PAMOO, MG-AMOO).

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metric;
pub mod objective;
pub mod optimizers;
pub mod parallel;
pub mod point;
pub mod problems;
pub mod rng;
pub mod suites;
pub mod trajectory;
pub mod weights_qp;

pub use error::{AmooError, Result};
pub use metric::{argmax_lowest, is_in_epsilon_set, max_gap, select_max_gap_index};
pub use objective::{FnObjective, JointEvaluator, Linearization, Objective, ObjectiveSet, PointEval, EVAL_TOLERANCE};
pub use parallel::Exec;
pub use point::{Point, WeightVector};
pub use trajectory::{average_iterate, Diagnostic, Trajectory};
pub use weights_qp::{
    brute_force_qp_oracle, gram_matrix, solve_nonneg_qp, Gram, QpSolution, WeightSubproblem,
};

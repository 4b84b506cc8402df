//! Decision models of a company's life cycle.
//!
//! * [`howard`]: average-reward policy iteration on controlled Markov
//!   problems ([`model`]), with dense solves from [`linalg`].
//! * [`validation`]: independent stationary-distribution gains, exhaustive
//!   policy enumeration and a seeded simulator.
//! * [`tree`]: decision trees and expected-value rollback.
//! * [`stages`]: finite-horizon staged models and backward induction.
//! * [`io`] and [`cli`]: problem files, reports and the command line.

pub mod cli;
pub mod howard;
pub mod io;
pub mod linalg;
pub mod model;
pub mod stages;
pub mod tree;
pub mod validation;

pub use howard::{
    improve_policy, policy_iteration, solve_gain_bias, value_determination, ImprovementTable,
    IterationTrace, SolveError,
};
pub use linalg::{solve_dense, DenseSystem, LinalgError};
pub use model::{
    classify_growth, expected_immediate_reward, policy_matrices, validate_problem, ActionSpec,
    ControlledMarkovProblem, GainBiasSolution, GrowthIndicators, GrowthState, ModelError,
    PolicyVector, ProblemDraft,
};
pub use stages::{backward_induction, evaluate_initial, StageValues, StagedModel};
pub use tree::{
    build_product_launch_tree, rollback, total_probability, LaunchParameters, TreeNode,
};
pub use validation::{exhaustive_gain_max, simulate, stationary_distribution, EnumerationResult};

//! Average-reward policy iteration.
//!
//! Value determination solves, for a fixed policy,
//!
//! ```text
//! g + v_i = q_i + sum_j p_ij v_j      i = 1..N,   v_ref = 0
//! ```
//!
//! for the gain `g` and the relative values `v`. Policy improvement then
//! picks, in every state, the action maximizing the test quantity
//! `q_i^k + sum_j p_ij^k v_j`. The two steps alternate until the improved
//! policy equals the incumbent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{solve_dense, DenseSystem, LinalgError};
use crate::model::{
    dot, policy_matrices, ControlledMarkovProblem, GainBiasSolution, ModelError, PolicyVector,
};

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// Slack used when comparing test values and gains.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("reference state {reference} out of range for {states} states")]
    ReferenceOutOfRange { reference: usize, states: usize },
    #[error("{what} has length {len}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        len: usize,
        expected: usize,
    },
    #[error(
        "value determination is singular; the policy may have more than one recurrent class ({0})"
    )]
    MultichainSuspected(LinalgError),
    #[error("policy iteration did not converge within {0} iterations")]
    MaxIterationsExceeded(usize),
}

/// Solves the gain/relative-value system for transition rows `p` and
/// expected rewards `q`, pinning `v[reference_state]` to zero.
///
/// This is the raw form of [`value_determination`]; it accepts any `q`,
/// which is useful when the rewards come from somewhere other than the
/// problem's reward rows.
pub fn solve_gain_bias(
    p: &[Vec<f64>],
    q: &[f64],
    reference_state: usize,
) -> Result<GainBiasSolution, SolveError> {
    let n = p.len();
    if q.len() != n {
        return Err(SolveError::ShapeMismatch {
            what: "reward vector",
            len: q.len(),
            expected: n,
        });
    }
    if let Some(row) = p.iter().find(|row| row.len() != n) {
        return Err(SolveError::ShapeMismatch {
            what: "transition row",
            len: row.len(),
            expected: n,
        });
    }
    if reference_state >= n {
        return Err(SolveError::ReferenceOutOfRange {
            reference: reference_state,
            states: n,
        });
    }

    // Unknown 0 is g; unknowns 1.. are v_j for j != reference_state.
    let free: Vec<usize> = (0..n).filter(|&j| j != reference_state).collect();
    let a = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(n);
            row.push(1.0);
            row.extend(
                free.iter()
                    .map(|&j| if i == j { 1.0 - p[i][j] } else { -p[i][j] }),
            );
            row
        })
        .collect();
    let system = DenseSystem::new(a, q.to_vec()).map_err(SolveError::MultichainSuspected)?;
    let x = solve_dense(&system).map_err(SolveError::MultichainSuspected)?;

    let mut v = vec![0.0; n];
    for (&j, &value) in free.iter().zip(&x[1..]) {
        v[j] = value;
    }
    Ok(GainBiasSolution {
        gain: x[0],
        v,
        reference_state,
    })
}

/// Gain and relative values of `policy`.
pub fn value_determination(
    problem: &ControlledMarkovProblem,
    policy: &PolicyVector,
    reference_state: usize,
) -> Result<GainBiasSolution, SolveError> {
    let m = policy_matrices(problem, policy)?;
    solve_gain_bias(&m.p, &m.q, reference_state)
}

/// Max-norm residual of `(g, v)` plugged back into the value-determination equations.
pub fn gain_bias_residual(p: &[Vec<f64>], q: &[f64], solution: &GainBiasSolution) -> f64 {
    p.iter()
        .zip(q)
        .enumerate()
        .map(|(i, (row, &qi))| (solution.gain + solution.v[i] - qi - dot(row, &solution.v)).abs())
        .fold(0.0, f64::max)
}

/// Test values of every (state, action) pair and the policy they select.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTable {
    /// `test_values[i][k] = q_i^k + sum_j p_ij^k v_j`
    pub test_values: Vec<Vec<f64>>,
    pub chosen: PolicyVector,
}

impl ImprovementTable {
    pub fn is_chosen(&self, state: usize, action: usize) -> bool {
        self.chosen.get(state) == action
    }
}

/// One policy-improvement pass.
///
/// A state keeps its incumbent action when that action's test value is
/// within [`IMPROVEMENT_TOLERANCE`] of the best; otherwise the lowest-index
/// maximizer wins.
pub fn improve_policy(
    problem: &ControlledMarkovProblem,
    v: &[f64],
    incumbent: &PolicyVector,
) -> Result<ImprovementTable, SolveError> {
    let n = problem.num_states();
    if v.len() != n {
        return Err(SolveError::ShapeMismatch {
            what: "relative value vector",
            len: v.len(),
            expected: n,
        });
    }
    incumbent.check(problem)?;

    let mut test_values = Vec::with_capacity(n);
    let mut chosen = Vec::with_capacity(n);
    for (i, actions) in (0..n).map(|i| (i, problem.actions(i))) {
        let row: Vec<f64> = actions
            .iter()
            .map(|a| dot(&a.p, &a.r) + dot(&a.p, v))
            .collect();
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let current = incumbent.get(i);
        let pick = if row[current] >= best - IMPROVEMENT_TOLERANCE {
            current
        } else {
            row.iter().position(|&t| t == best).unwrap_or(current)
        };
        chosen.push(pick);
        test_values.push(row);
    }
    Ok(ImprovementTable {
        test_values,
        chosen: PolicyVector::from_raw(chosen),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStep {
    pub policy: PolicyVector,
    pub solution: GainBiasSolution,
    pub improvement: ImprovementTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<IterationStep>,
    /// Policy at which the iteration stopped.
    pub policy: PolicyVector,
}

impl IterationTrace {
    pub fn gains(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.solution.gain).collect()
    }

    pub fn final_gain(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.solution.gain)
    }

    pub fn final_solution(&self) -> Option<&GainBiasSolution> {
        self.steps.last().map(|s| &s.solution)
    }
}

/// Alternates value determination and policy improvement from
/// `initial_policy` until the policy stops changing.
pub fn policy_iteration(
    problem: &ControlledMarkovProblem,
    initial_policy: &PolicyVector,
    reference_state: usize,
    max_iterations: usize,
) -> Result<IterationTrace, SolveError> {
    initial_policy.check(problem)?;
    let mut policy = initial_policy.clone();
    let mut steps = Vec::new();
    for _ in 0..max_iterations {
        let solution = value_determination(problem, &policy, reference_state)?;
        let improvement = improve_policy(problem, &solution.v, &policy)?;
        let converged = improvement.chosen == policy;
        let next = improvement.chosen.clone();
        steps.push(IterationStep {
            policy: policy.clone(),
            solution,
            improvement,
        });
        if converged {
            return Ok(IterationTrace { steps, policy });
        }
        policy = next;
    }
    Err(SolveError::MaxIterationsExceeded(max_iterations))
}

//! Controlled Markov problems and the quantities shared by every solver.
//!
//! A [`ControlledMarkovProblem`] holds `N` states. Each state owns one or
//! more actions, and each action carries a transition row `p_ij` and a
//! reward row `r_ij` (rewards sit on transitions, not on states). Action and
//! state indices are 0-based in this API; external formats use 1-based
//! numbering and convert at the boundary.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance applied to every probability row sum.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Default stable-state band for [`classify_growth`].
pub const DEFAULT_GROWTH_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub label: String,
    /// Transition probabilities to each state.
    pub p: Vec<f64>,
    /// Capitalization change attached to each transition.
    pub r: Vec<f64>,
}

/// Unvalidated problem as read from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDraft {
    pub states: Vec<String>,
    pub actions: Vec<Vec<ActionSpec>>,
}

/// One broken invariant, with 1-based coordinates in its message.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("problem has no states")]
    NoStates,
    #[error("state {state}: empty action set")]
    EmptyActionSet { state: usize },
    #[error("{states} state labels but action lists for {lists} states")]
    StateCountMismatch { states: usize, lists: usize },
    #[error("state {state}, action {action}: {row} row has length {len}, expected {expected}")]
    ShapeMismatch {
        state: usize,
        action: usize,
        row: &'static str,
        len: usize,
        expected: usize,
    },
    #[error("state {state}, action {action}: p[{target}] = {value} is negative")]
    NegativeProbability {
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
    #[error("state {state}, action {action}: p[{target}] = {value} is not a probability")]
    InvalidProbability {
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
    #[error("state {state}, action {action}: p row sums to {sum}, expected 1")]
    RowSumError {
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("state {state}, action {action}: r[{target}] = {value} is not finite")]
    NonFiniteReward {
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid problem:\n{}", render_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("state index {state} out of range for {states} states")]
    StateOutOfRange { state: usize, states: usize },
    #[error("action index {action} out of range for state {state} with {actions} actions")]
    ActionOutOfRange {
        state: usize,
        action: usize,
        actions: usize,
    },
    #[error("policy has {len} entries, problem has {states} states")]
    PolicyLength { len: usize, states: usize },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Validated controlled Markov problem. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemDraft", into = "ProblemDraft")]
pub struct ControlledMarkovProblem {
    state_labels: Vec<String>,
    actions: Vec<Vec<ActionSpec>>,
}

impl ControlledMarkovProblem {
    pub fn new(
        state_labels: Vec<String>,
        actions: Vec<Vec<ActionSpec>>,
    ) -> Result<Self, ModelError> {
        validate_problem(ProblemDraft {
            states: state_labels,
            actions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn actions(&self, state: usize) -> &[ActionSpec] {
        &self.actions[state]
    }

    /// Number of actions available in each state.
    pub fn action_counts(&self) -> Vec<usize> {
        self.actions.iter().map(Vec::len).collect()
    }

    pub fn action(&self, state: usize, action: usize) -> Result<&ActionSpec, ModelError> {
        let actions = self.actions.get(state).ok_or(ModelError::StateOutOfRange {
            state,
            states: self.num_states(),
        })?;
        actions.get(action).ok_or(ModelError::ActionOutOfRange {
            state,
            action,
            actions: actions.len(),
        })
    }

    /// Number of pure stationary policies, saturating at `u128::MAX`.
    pub fn policy_count(&self) -> u128 {
        self.actions
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
    }

    /// Applies `f` to every reward entry. The result is revalidated.
    pub fn map_rewards(&self, f: impl Fn(f64) -> f64) -> Result<Self, ModelError> {
        let actions = self
            .actions
            .iter()
            .map(|list| {
                list.iter()
                    .map(|a| ActionSpec {
                        label: a.label.clone(),
                        p: a.p.clone(),
                        r: a.r.iter().map(|&x| f(x)).collect(),
                    })
                    .collect()
            })
            .collect();
        Self::new(self.state_labels.clone(), actions)
    }
}

impl TryFrom<ProblemDraft> for ControlledMarkovProblem {
    type Error = ModelError;

    fn try_from(draft: ProblemDraft) -> Result<Self, Self::Error> {
        validate_problem(draft)
    }
}

impl From<ControlledMarkovProblem> for ProblemDraft {
    fn from(problem: ControlledMarkovProblem) -> Self {
        ProblemDraft {
            states: problem.state_labels,
            actions: problem.actions,
        }
    }
}

/// Checks every invariant of a candidate problem and collects all
/// violations instead of stopping at the first.
pub fn validate_problem(raw: ProblemDraft) -> Result<ControlledMarkovProblem, ModelError> {
    let mut violations = Vec::new();
    let n = raw.states.len();
    if n == 0 {
        violations.push(Violation::NoStates);
    }
    if raw.actions.len() != n {
        violations.push(Violation::StateCountMismatch {
            states: n,
            lists: raw.actions.len(),
        });
    }
    for (i, list) in raw.actions.iter().enumerate() {
        let state = i + 1;
        if list.is_empty() {
            violations.push(Violation::EmptyActionSet { state });
        }
        for (k, spec) in list.iter().enumerate() {
            let action = k + 1;
            for (row, len) in [("p", spec.p.len()), ("r", spec.r.len())] {
                if len != n {
                    violations.push(Violation::ShapeMismatch {
                        state,
                        action,
                        row,
                        len,
                        expected: n,
                    });
                }
            }
            for (j, &value) in spec.p.iter().enumerate() {
                if value < 0.0 {
                    violations.push(Violation::NegativeProbability {
                        state,
                        action,
                        target: j + 1,
                        value,
                    });
                } else if value.is_nan() || value > 1.0 {
                    violations.push(Violation::InvalidProbability {
                        state,
                        action,
                        target: j + 1,
                        value,
                    });
                }
            }
            let sum: f64 = spec.p.iter().sum();
            if sum.is_nan() || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSumError { state, action, sum });
            }
            for (j, &value) in spec.r.iter().enumerate() {
                if !value.is_finite() {
                    violations.push(Violation::NonFiniteReward {
                        state,
                        action,
                        target: j + 1,
                        value,
                    });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(ControlledMarkovProblem {
            state_labels: raw.states,
            actions: raw.actions,
        })
    } else {
        Err(ModelError::Invalid(violations))
    }
}

/// One action per state, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyVector(Vec<usize>);

impl PolicyVector {
    /// Builds a policy from 0-based indices, checked against `problem`.
    pub fn new(problem: &ControlledMarkovProblem, choice: Vec<usize>) -> Result<Self, ModelError> {
        let policy = PolicyVector(choice);
        policy.check(problem)?;
        Ok(policy)
    }

    /// Builds a policy from 1-based indices as used in external formats.
    pub fn from_one_based(
        problem: &ControlledMarkovProblem,
        choice: &[usize],
    ) -> Result<Self, ModelError> {
        let mut zero_based = Vec::with_capacity(choice.len());
        for (state, &c) in choice.iter().enumerate() {
            if c == 0 {
                return Err(ModelError::ActionOutOfRange {
                    state,
                    action: 0,
                    actions: problem.actions.get(state).map_or(0, Vec::len),
                });
            }
            zero_based.push(c - 1);
        }
        Self::new(problem, zero_based)
    }

    /// Every state takes its first action.
    pub fn first_actions(problem: &ControlledMarkovProblem) -> Self {
        PolicyVector(vec![0; problem.num_states()])
    }

    pub(crate) fn from_raw(choice: Vec<usize>) -> Self {
        PolicyVector(choice)
    }

    pub fn check(&self, problem: &ControlledMarkovProblem) -> Result<(), ModelError> {
        if self.0.len() != problem.num_states() {
            return Err(ModelError::PolicyLength {
                len: self.0.len(),
                states: problem.num_states(),
            });
        }
        for (state, &action) in self.0.iter().enumerate() {
            problem.action(state, action)?;
        }
        Ok(())
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|c| c + 1).collect()
    }
}

impl fmt::Display for PolicyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Gain and relative values of a fixed policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainBiasSolution {
    /// Long-run average reward per transition.
    pub gain: f64,
    /// Relative values; `v[reference_state]` is exactly zero.
    pub v: Vec<f64>,
    pub reference_state: usize,
}

/// Expected one-step reward `q_i^k = sum_j p_ij r_ij` of action `action` in `state`.
pub fn expected_immediate_reward(
    problem: &ControlledMarkovProblem,
    state: usize,
    action: usize,
) -> Result<f64, ModelError> {
    let spec = problem.action(state, action)?;
    Ok(dot(&spec.p, &spec.r))
}

/// Left-to-right dot product. Summation order is fixed so that every caller
/// gets bit-identical results.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Transition matrix and expected-reward vector of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyMatrices {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

pub fn policy_matrices(
    problem: &ControlledMarkovProblem,
    policy: &PolicyVector,
) -> Result<PolicyMatrices, ModelError> {
    policy.check(problem)?;
    let mut p = Vec::with_capacity(problem.num_states());
    let mut q = Vec::with_capacity(problem.num_states());
    for (state, &action) in policy.choices().iter().enumerate() {
        let spec = &problem.actions[state][action];
        p.push(spec.p.clone());
        q.push(dot(&spec.p, &spec.r));
    }
    Ok(PolicyMatrices { p, q })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthState {
    Growth,
    Stable,
    Decline,
}

impl fmt::Display for GrowthState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthState::Growth => "growth",
            GrowthState::Stable => "stable",
            GrowthState::Decline => "decline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthIndicators {
    pub t: f64,
    pub x: f64,
    /// `x / t`
    pub rate: f64,
    /// `rate / t`
    pub acceleration: f64,
    pub state: GrowthState,
}

/// Growth rate and acceleration of a stock-price growth value `x` observed at time `t`.
///
/// The rate is the plain ratio `x / t`; rates within `epsilon` of zero count as stable.
pub fn classify_growth(t: f64, x: f64, epsilon: f64) -> Result<GrowthIndicators, ModelError> {
    if t.is_nan() || t <= 0.0 {
        return Err(ModelError::NonPositiveTime(t));
    }
    let rate = x / t;
    let acceleration = rate / t;
    let state = if rate > epsilon {
        GrowthState::Growth
    } else if rate < -epsilon {
        GrowthState::Decline
    } else {
        GrowthState::Stable
    };
    Ok(GrowthIndicators {
        t,
        x,
        rate,
        acceleration,
        state,
    })
}

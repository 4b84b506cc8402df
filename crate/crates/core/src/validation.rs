//! Independent checks for policy iteration.
//!
//! Gains here come from stationary distributions (`g = pi . q`), a route
//! disjoint from the gain/relative-value system solved by
//! [`crate::howard`]. The simulator gives a third, empirical estimate.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{solve_dense, DenseSystem};
use crate::model::{dot, policy_matrices, ControlledMarkovProblem, ModelError, PolicyVector};

/// Upper bound on the number of policies [`exhaustive_gain_max`] will visit.
pub const MAX_ENUMERATED_POLICIES: u128 = 10_000_000;

/// Per-policy gains are kept in the result up to this many policies.
pub const MAX_REPORTED_POLICIES: u128 = 100_000;

/// Stationary components below `-NEGATIVE_MASS_TOLERANCE` mean the solve
/// landed on something that is not a distribution.
pub const NEGATIVE_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("chain has no unique stationary distribution")]
    NonUniqueStationary,
    #[error("{count} policies exceed the enumeration limit of {MAX_ENUMERATED_POLICIES}")]
    TooManyPolicies { count: u128 },
    #[error("every policy was flagged as multichain")]
    NoUnichainPolicy,
    #[error("transition matrix is not square")]
    NotSquare,
    #[error("simulation needs at least one step")]
    ZeroSteps,
    #[error("start state {start} out of range for {states} states")]
    StartOutOfRange { start: usize, states: usize },
}

/// Solves `pi P = pi`, `sum pi = 1` by replacing the last balance equation
/// with the normalization constraint.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>, OracleError> {
    let n = p.len();
    if p.iter().any(|row| row.len() != n) || n == 0 {
        return Err(OracleError::NotSquare);
    }
    // Row j of (P^T - I): sum_i pi_i p_ij - pi_j = 0.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| p[i][j] - if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    let system = DenseSystem::new(a, b).map_err(|_| OracleError::NotSquare)?;
    let pi = solve_dense(&system).map_err(|_| OracleError::NonUniqueStationary)?;
    if pi.iter().any(|&x| x < -NEGATIVE_MASS_TOLERANCE) {
        return Err(OracleError::NonUniqueStationary);
    }
    Ok(pi)
}

/// Long-run average reward of `policy`, computed as `pi . q`.
pub fn stationary_gain(
    problem: &ControlledMarkovProblem,
    policy: &PolicyVector,
) -> Result<f64, OracleError> {
    let m = policy_matrices(problem, policy)?;
    let pi = stationary_distribution(&m.p)?;
    Ok(dot(&pi, &m.q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub best_policy: PolicyVector,
    pub best_gain: f64,
    /// Number of policies visited, skipped ones included.
    pub evaluated: u128,
    /// Every `(policy, gain)` pair, in lexicographic policy order, when the
    /// policy space is small enough.
    pub per_policy: Option<Vec<(PolicyVector, f64)>>,
    /// Policies whose chain has no unique stationary distribution.
    pub skipped: Vec<PolicyVector>,
}

fn decode_policy(mut index: u128, counts: &[usize]) -> Vec<usize> {
    let mut choice = vec![0; counts.len()];
    for (slot, &k) in choice.iter_mut().zip(counts).rev() {
        *slot = (index % k as u128) as usize;
        index /= k as u128;
    }
    choice
}

/// Evaluates the gain of every stationary policy.
///
/// Policies are numbered in lexicographic order of their action vectors, so
/// ties on the best gain resolve to the lexicographically smallest policy
/// no matter how the work is split across threads.
pub fn exhaustive_gain_max(
    problem: &ControlledMarkovProblem,
) -> Result<EnumerationResult, OracleError> {
    let count = problem.policy_count();
    if count > MAX_ENUMERATED_POLICIES {
        return Err(OracleError::TooManyPolicies { count });
    }
    let counts = problem.action_counts();
    let gains: Vec<(u128, Option<f64>)> = (0..count as u64)
        .into_par_iter()
        .map(|idx| {
            let policy = PolicyVector::from_raw(decode_policy(idx as u128, &counts));
            let gain = match stationary_gain(problem, &policy) {
                Ok(g) => Some(g),
                Err(OracleError::NonUniqueStationary) => None,
                Err(e) => unreachable!("enumerated policy is valid: {e}"),
            };
            (idx as u128, gain)
        })
        .collect();

    let mut best: Option<(u128, f64)> = None;
    let mut skipped = Vec::new();
    for &(idx, gain) in &gains {
        match gain {
            Some(g) => {
                if best.is_none_or(|(_, b)| g > b) {
                    best = Some((idx, g));
                }
            }
            None => skipped.push(PolicyVector::from_raw(decode_policy(idx, &counts))),
        }
    }
    let (best_idx, best_gain) = best.ok_or(OracleError::NoUnichainPolicy)?;

    let per_policy = (count <= MAX_REPORTED_POLICIES).then(|| {
        gains
            .iter()
            .filter_map(|&(idx, g)| {
                g.map(|g| (PolicyVector::from_raw(decode_policy(idx, &counts)), g))
            })
            .collect()
    });

    Ok(EnumerationResult {
        best_policy: PolicyVector::from_raw(decode_policy(best_idx, &counts)),
        best_gain,
        evaluated: count,
        per_policy,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub steps: u64,
    pub start_state: usize,
    pub total_reward: f64,
    /// `total_reward / steps`
    pub empirical_gain: f64,
    /// Fraction of steps that departed from each state.
    pub state_visit_frequencies: Vec<f64>,
}

/// Samples a transition target by walking the row left to right until the
/// uniform draw falls strictly below the cumulative mass.
fn sample_row(row: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (j, &p) in row.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return j;
        }
    }
    // Rounding left the cumulative sum just below u.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Runs the policy's Markov chain for `steps` transitions.
///
/// Uses ChaCha8 seeded from `seed`, one uniform `f64` per transition, so a
/// given `(problem, policy, start, steps, seed)` always gives the same report.
pub fn simulate(
    problem: &ControlledMarkovProblem,
    policy: &PolicyVector,
    start_state: usize,
    steps: u64,
    seed: u64,
) -> Result<SimulationReport, OracleError> {
    policy.check(problem)?;
    if steps == 0 {
        return Err(OracleError::ZeroSteps);
    }
    let n = problem.num_states();
    if start_state >= n {
        return Err(OracleError::StartOutOfRange {
            start: start_state,
            states: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visits = vec![0u64; n];
    let mut total = 0.0;
    let mut state = start_state;
    for _ in 0..steps {
        let action = &problem.actions(state)[policy.get(state)];
        visits[state] += 1;
        let next = sample_row(&action.p, rng.random::<f64>());
        total += action.r[next];
        state = next;
    }
    Ok(SimulationReport {
        seed,
        steps,
        start_state,
        total_reward: total,
        empirical_gain: total / steps as f64,
        state_visit_frequencies: visits.iter().map(|&c| c as f64 / steps as f64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActionSpec;

    fn action(p: &[f64], r: &[f64]) -> ActionSpec {
        ActionSpec {
            label: String::new(),
            p: p.to_vec(),
            r: r.to_vec(),
        }
    }

    fn flip_flop() -> ControlledMarkovProblem {
        ControlledMarkovProblem::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![action(&[0.0, 1.0], &[0.0, 0.0])],
                vec![action(&[1.0, 0.0], &[10.0, 0.0])],
            ],
        )
        .unwrap()
    }

    #[test]
    fn periodic_chain_is_uniform() {
        let pi = stationary_distribution(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(pi, vec![0.5, 0.5]);
    }

    #[test]
    fn identity_chain_has_no_unique_distribution() {
        assert_eq!(
            stationary_distribution(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(OracleError::NonUniqueStationary)
        );
    }

    #[test]
    fn single_policy_enumeration() {
        let problem = flip_flop();
        let result = exhaustive_gain_max(&problem).unwrap();
        assert_eq!(result.evaluated, 1);
        assert_eq!(result.best_gain, 5.0);
        assert_eq!(result.per_policy.unwrap().len(), 1);
    }

    #[test]
    fn multichain_policies_are_reported() {
        let problem = ControlledMarkovProblem::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![
                    action(&[1.0, 0.0], &[1.0, 0.0]),
                    action(&[0.0, 1.0], &[0.0, 0.0]),
                ],
                vec![action(&[0.0, 1.0], &[0.0, 2.0])],
            ],
        )
        .unwrap();
        let result = exhaustive_gain_max(&problem).unwrap();
        assert_eq!(result.skipped, vec![PolicyVector::from_raw(vec![0, 0])]);
        assert_eq!(result.best_policy.choices(), &[1, 0]);
        assert_eq!(result.best_gain, 2.0);
    }

    #[test]
    fn decode_is_lexicographic() {
        let counts = [2, 3];
        let decoded: Vec<Vec<usize>> = (0..6).map(|i| decode_policy(i, &counts)).collect();
        let mut sorted = decoded.clone();
        sorted.sort();
        assert_eq!(decoded, sorted);
        assert_eq!(decoded[5], vec![1, 2]);
    }

    #[test]
    fn constant_reward_simulation_is_exact() {
        let problem =
            ControlledMarkovProblem::new(vec!["s".into()], vec![vec![action(&[1.0], &[2.5])]])
                .unwrap();
        let report =
            simulate(&problem, &PolicyVector::first_actions(&problem), 0, 1000, 3).unwrap();
        assert_eq!(report.empirical_gain, 2.5);
        assert_eq!(report.state_visit_frequencies, vec![1.0]);
    }

    #[test]
    fn alternating_chain_even_steps() {
        let problem = flip_flop();
        let policy = PolicyVector::first_actions(&problem);
        for steps in [2, 10, 1000] {
            let report = simulate(&problem, &policy, 0, steps, 11).unwrap();
            assert!((report.empirical_gain - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let problem = ControlledMarkovProblem::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![action(&[0.3, 0.7], &[1.0, -2.0])],
                vec![action(&[0.6, 0.4], &[4.0, 0.5])],
            ],
        )
        .unwrap();
        let policy = PolicyVector::first_actions(&problem);
        let a = simulate(&problem, &policy, 1, 5000, 99).unwrap();
        let b = simulate(&problem, &policy, 1, 5000, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&problem, &policy, 1, 5000, 100).unwrap();
        assert_ne!(a.total_reward, c.total_reward);
        let sum: f64 = a.state_visit_frequencies.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simulation_argument_errors() {
        let problem = flip_flop();
        let policy = PolicyVector::first_actions(&problem);
        assert_eq!(
            simulate(&problem, &policy, 0, 0, 1),
            Err(OracleError::ZeroSteps)
        );
        assert!(matches!(
            simulate(&problem, &policy, 2, 1, 1),
            Err(OracleError::StartOutOfRange { .. })
        ));
    }

    #[test]
    fn sampling_boundaries_are_strict() {
        assert_eq!(sample_row(&[0.5, 0.5], 0.0), 0);
        assert_eq!(sample_row(&[0.5, 0.5], 0.5), 1);
        assert_eq!(sample_row(&[0.0, 1.0], 0.0), 1);
        assert_eq!(sample_row(&[0.3, 0.7, 0.0], 0.9999999999999999), 1);
    }
}

//! Finite-horizon staged models solved by backward induction.
//!
//! States are grouped into stages `0..=T`. Every state of a non-final stage
//! owns a non-empty set of controls; a control yields an immediate reward
//! and a distribution over the states of the next stage. States of the final
//! stage carry a terminal reward. A deterministic model is the special case
//! where every distribution is a point mass.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ROW_SUM_TOLERANCE;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StageError {
    #[error("model has no stages")]
    NoStages,
    #[error("stage {stage} has no states")]
    EmptyStage { stage: usize },
    #[error("stage {stage}: duplicate {what} label {label:?}")]
    DuplicateLabel {
        stage: usize,
        what: &'static str,
        label: String,
    },
    #[error("stage {stage}, state {state:?}: {reason}")]
    State {
        stage: usize,
        state: String,
        reason: String,
    },
    #[error("stage {stage}, state {state:?}, control {control:?}: {reason}")]
    Control {
        stage: usize,
        state: String,
        control: String,
        reason: String,
    },
    #[error("initial distribution: {0}")]
    Initial(String),
}

/// Unvalidated staged model as read from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedDraft {
    pub stages: Vec<Vec<StateDraft>>,
    /// Probability of starting in each stage-0 state, by label.
    pub initial: BTreeMap<String, f64>,
    /// Accept control distributions summing to less than one.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_substochastic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDraft {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<ControlDraft>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDraft {
    pub label: String,
    pub reward: f64,
    /// Next-stage state label to probability.
    pub dist: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub label: String,
    pub reward: f64,
    /// Probabilities indexed like the next stage's states.
    pub dist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Terminal { reward: f64 },
    Controlled { controls: Vec<Control> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageState {
    pub label: String,
    pub kind: StateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StagedDraft", into = "StagedDraft")]
pub struct StagedModel {
    stages: Vec<Vec<StageState>>,
    initial: Vec<f64>,
    allow_substochastic: bool,
    warnings: Vec<String>,
}

impl StagedModel {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Index of the final stage.
    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn stage(&self, t: usize) -> &[StageState] {
        &self.stages[t]
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn find(&self, stage: usize, label: &str) -> Option<usize> {
        self.stages
            .get(stage)?
            .iter()
            .position(|s| s.label == label)
    }

    /// Diagnostics accepted during validation (sub-stochastic controls).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn total_controls(&self) -> usize {
        self.stages
            .iter()
            .flatten()
            .map(|s| match &s.kind {
                StateKind::Controlled { controls } => controls.len(),
                StateKind::Terminal { .. } => 0,
            })
            .sum()
    }

    /// Adds `c` to every terminal reward.
    pub fn shift_terminal_rewards(&self, c: f64) -> StagedModel {
        let mut model = self.clone();
        for state in model.stages.iter_mut().flatten() {
            if let StateKind::Terminal { reward } = &mut state.kind {
                *reward += c;
            }
        }
        model
    }
}

fn check_probability(p: f64) -> Result<(), String> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(format!("probability {p} is outside [0, 1]"))
    }
}

impl TryFrom<StagedDraft> for StagedModel {
    type Error = StageError;

    fn try_from(draft: StagedDraft) -> Result<Self, StageError> {
        if draft.stages.is_empty() {
            return Err(StageError::NoStages);
        }
        let horizon = draft.stages.len() - 1;
        for (t, states) in draft.stages.iter().enumerate() {
            if states.is_empty() {
                return Err(StageError::EmptyStage { stage: t });
            }
            let mut seen = HashSet::new();
            let mut seen_controls = HashSet::new();
            for s in states {
                if !seen.insert(s.label.as_str()) {
                    return Err(StageError::DuplicateLabel {
                        stage: t,
                        what: "state",
                        label: s.label.clone(),
                    });
                }
                for u in &s.controls {
                    if !seen_controls.insert(u.label.as_str()) {
                        return Err(StageError::DuplicateLabel {
                            stage: t,
                            what: "control",
                            label: u.label.clone(),
                        });
                    }
                }
            }
        }

        let mut warnings = Vec::new();
        let mut stages = Vec::with_capacity(draft.stages.len());
        for (t, states) in draft.stages.iter().enumerate() {
            let mut resolved = Vec::with_capacity(states.len());
            for s in states {
                let state_err = |reason: String| StageError::State {
                    stage: t,
                    state: s.label.clone(),
                    reason,
                };
                let kind = if t == horizon {
                    if !s.controls.is_empty() {
                        return Err(state_err("final-stage state has controls".into()));
                    }
                    let reward = s.terminal_reward.ok_or_else(|| {
                        state_err("final-stage state needs a terminal_reward".into())
                    })?;
                    if !reward.is_finite() {
                        return Err(state_err(format!("terminal reward {reward} is not finite")));
                    }
                    StateKind::Terminal { reward }
                } else {
                    if s.terminal_reward.is_some() {
                        return Err(state_err(
                            "only final-stage states take a terminal_reward".into(),
                        ));
                    }
                    if s.controls.is_empty() {
                        return Err(state_err("non-final state has no controls".into()));
                    }
                    let next = &draft.stages[t + 1];
                    let mut controls = Vec::with_capacity(s.controls.len());
                    for u in &s.controls {
                        let control_err = |reason: String| StageError::Control {
                            stage: t,
                            state: s.label.clone(),
                            control: u.label.clone(),
                            reason,
                        };
                        if !u.reward.is_finite() {
                            return Err(control_err(format!("reward {} is not finite", u.reward)));
                        }
                        let mut dist = vec![0.0; next.len()];
                        for (target, &p) in &u.dist {
                            let j =
                                next.iter()
                                    .position(|x| &x.label == target)
                                    .ok_or_else(|| {
                                        control_err(format!(
                                            "{target:?} is not a state of stage {}",
                                            t + 1
                                        ))
                                    })?;
                            check_probability(p).map_err(control_err)?;
                            dist[j] = p;
                        }
                        let sum: f64 = dist.iter().sum();
                        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                            if draft.allow_substochastic && sum < 1.0 {
                                warnings.push(format!(
                                    "stage {t}, state {:?}, control {:?}: distribution sums to {sum} (sub-stochastic)",
                                    s.label, u.label
                                ));
                            } else {
                                return Err(control_err(format!("distribution sums to {sum}")));
                            }
                        }
                        controls.push(Control {
                            label: u.label.clone(),
                            reward: u.reward,
                            dist,
                        });
                    }
                    StateKind::Controlled { controls }
                };
                resolved.push(StageState {
                    label: s.label.clone(),
                    kind,
                });
            }
            stages.push(resolved);
        }

        let first = &draft.stages[0];
        let mut initial = vec![0.0; first.len()];
        for (label, &p) in &draft.initial {
            let i = first
                .iter()
                .position(|s| &s.label == label)
                .ok_or_else(|| StageError::Initial(format!("{label:?} is not a stage-0 state")))?;
            check_probability(p).map_err(StageError::Initial)?;
            initial[i] = p;
        }
        let sum: f64 = initial.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(StageError::Initial(format!("sums to {sum}")));
        }

        Ok(StagedModel {
            stages,
            initial,
            allow_substochastic: draft.allow_substochastic,
            warnings,
        })
    }
}

impl From<StagedModel> for StagedDraft {
    fn from(model: StagedModel) -> Self {
        let labels: Vec<Vec<String>> = model
            .stages
            .iter()
            .map(|s| s.iter().map(|x| x.label.clone()).collect())
            .collect();
        let sparse = |labels: &[String], probs: &[f64]| -> BTreeMap<String, f64> {
            labels
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p != 0.0)
                .map(|(l, p)| (l.clone(), *p))
                .collect()
        };
        let initial = sparse(&labels[0], &model.initial);
        let stages = model
            .stages
            .iter()
            .enumerate()
            .map(|(t, states)| {
                states
                    .iter()
                    .map(|s| match &s.kind {
                        StateKind::Terminal { reward } => StateDraft {
                            label: s.label.clone(),
                            controls: Vec::new(),
                            terminal_reward: Some(*reward),
                        },
                        StateKind::Controlled { controls } => StateDraft {
                            label: s.label.clone(),
                            controls: controls
                                .iter()
                                .map(|u| ControlDraft {
                                    label: u.label.clone(),
                                    reward: u.reward,
                                    dist: sparse(&labels[t + 1], &u.dist),
                                })
                                .collect(),
                            terminal_reward: None,
                        },
                    })
                    .collect()
            })
            .collect();
        StagedDraft {
            stages,
            initial,
            allow_substochastic: model.allow_substochastic,
        }
    }
}

/// Optimal values of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSlice {
    pub values: Vec<f64>,
    /// `r(u) + sum p(x'|u) v(x')` for every control of every state; empty
    /// for terminal states.
    pub control_values: Vec<Vec<f64>>,
    /// Index of the optimal control, `None` for terminal states.
    pub optimal: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageValues {
    pub stages: Vec<StageSlice>,
}

impl StageValues {
    pub fn value(&self, stage: usize, state: usize) -> f64 {
        self.stages[stage].values[state]
    }

    pub fn optimal_control(&self, stage: usize, state: usize) -> Option<usize> {
        self.stages[stage].optimal[state]
    }

    pub fn control_values(&self, stage: usize, state: usize) -> &[f64] {
        &self.stages[stage].control_values[state]
    }
}

/// Evaluates stage `t` from the values of stage `t + 1`.
///
/// `next` is ignored for the final stage. Ties go to the earliest-listed control.
pub fn evaluate_stage(model: &StagedModel, t: usize, next: &[f64]) -> StageSlice {
    let mut slice = StageSlice {
        values: Vec::with_capacity(model.stages[t].len()),
        control_values: Vec::with_capacity(model.stages[t].len()),
        optimal: Vec::with_capacity(model.stages[t].len()),
    };
    for state in &model.stages[t] {
        match &state.kind {
            StateKind::Terminal { reward } => {
                slice.values.push(*reward);
                slice.control_values.push(Vec::new());
                slice.optimal.push(None);
            }
            StateKind::Controlled { controls } => {
                let values: Vec<f64> = controls
                    .iter()
                    .map(|u| {
                        u.reward + u.dist.iter().zip(next).fold(0.0, |acc, (p, v)| acc + p * v)
                    })
                    .collect();
                let mut best = 0;
                for (k, &v) in values.iter().enumerate().skip(1) {
                    if v > values[best] {
                        best = k;
                    }
                }
                slice.values.push(values[best]);
                slice.optimal.push(Some(best));
                slice.control_values.push(values);
            }
        }
    }
    slice
}

pub fn backward_induction(model: &StagedModel) -> StageValues {
    let mut stages: Vec<StageSlice> = Vec::with_capacity(model.num_stages());
    let mut next: Vec<f64> = Vec::new();
    for t in (0..model.num_stages()).rev() {
        let slice = evaluate_stage(model, t, &next);
        next = slice.values.clone();
        stages.push(slice);
    }
    stages.reverse();
    StageValues { stages }
}

/// Expected optimal value under the initial distribution.
pub fn evaluate_initial(model: &StagedModel, values: &StageValues) -> f64 {
    model
        .initial
        .iter()
        .zip(&values.stages[0].values)
        .fold(0.0, |acc, (mu, v)| acc + mu * v)
}

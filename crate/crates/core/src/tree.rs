//! Decision trees with expected-value rollback.
//!
//! A tree mixes three node kinds: decision nodes (the owner picks a branch,
//! each branch may carry a signed cash adjustment), chance nodes (nature
//! picks a branch with a given probability) and terminal payoffs. Rollback
//! evaluates the tree bottom-up: expectation at chance nodes, maximum of
//! `adjustment + child value` at decision nodes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ROW_SUM_TOLERANCE;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{what} has length {len}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        len: usize,
        expected: usize,
    },
    #[error("{what} is not a probability distribution (sum {sum})")]
    InvalidDistribution { what: String, sum: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Decision { branches: Vec<DecisionBranch> },
    Chance { branches: Vec<ChanceBranch> },
    Terminal { payoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionBranch {
    pub label: String,
    /// Cash paid (negative) or received (positive) when taking this branch.
    #[serde(default)]
    pub adjustment: f64,
    pub child: TreeNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanceBranch {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    pub probability: f64,
    pub child: TreeNode,
}

impl TreeNode {
    pub fn terminal(payoff: f64) -> Self {
        TreeNode::Terminal { payoff }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        self.validate_at("root")
    }

    fn validate_at(&self, path: &str) -> Result<(), TreeError> {
        let invalid = |reason: String| TreeError::Invalid {
            path: path.to_string(),
            reason,
        };
        match self {
            TreeNode::Terminal { payoff } => {
                if !payoff.is_finite() {
                    return Err(invalid(format!("payoff {payoff} is not finite")));
                }
            }
            TreeNode::Decision { branches } => {
                if branches.is_empty() {
                    return Err(invalid("decision node has no branches".into()));
                }
                for (i, b) in branches.iter().enumerate() {
                    if !b.adjustment.is_finite() {
                        return Err(invalid(format!(
                            "branch {i} adjustment {} is not finite",
                            b.adjustment
                        )));
                    }
                    b.child.validate_at(&format!("{path}/branches[{i}]"))?;
                }
            }
            TreeNode::Chance { branches } => {
                if branches.is_empty() {
                    return Err(invalid("chance node has no branches".into()));
                }
                let mut sum = 0.0;
                for (i, b) in branches.iter().enumerate() {
                    if !(0.0..=1.0).contains(&b.probability) {
                        return Err(invalid(format!(
                            "branch {i} probability {} is outside [0, 1]",
                            b.probability
                        )));
                    }
                    sum += b.probability;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(invalid(format!("branch probabilities sum to {sum}")));
                }
                for (i, b) in branches.iter().enumerate() {
                    b.child.validate_at(&format!("{path}/branches[{i}]"))?;
                }
            }
        }
        Ok(())
    }

    pub fn decision_node_count(&self) -> usize {
        match self {
            TreeNode::Terminal { .. } => 0,
            TreeNode::Decision { branches } => {
                1 + branches
                    .iter()
                    .map(|b| b.child.decision_node_count())
                    .sum::<usize>()
            }
            TreeNode::Chance { branches } => {
                branches.iter().map(|b| b.child.decision_node_count()).sum()
            }
        }
    }

    /// Multiplies every payoff and adjustment by `factor`.
    pub fn scaled(&self, factor: f64) -> TreeNode {
        match self {
            TreeNode::Terminal { payoff } => TreeNode::Terminal {
                payoff: payoff * factor,
            },
            TreeNode::Decision { branches } => TreeNode::Decision {
                branches: branches
                    .iter()
                    .map(|b| DecisionBranch {
                        label: b.label.clone(),
                        adjustment: b.adjustment * factor,
                        child: b.child.scaled(factor),
                    })
                    .collect(),
            },
            TreeNode::Chance { branches } => TreeNode::Chance {
                branches: branches
                    .iter()
                    .map(|b| ChanceBranch {
                        label: b.label.clone(),
                        probability: b.probability,
                        child: b.child.scaled(factor),
                    })
                    .collect(),
            },
        }
    }
}

/// A tree annotated with the rolled-back value of every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolledBackTree {
    pub value: f64,
    pub node: RolledNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RolledNode {
    Decision {
        /// Index of the optimal branch.
        best: usize,
        branches: Vec<RolledDecisionBranch>,
    },
    Chance {
        branches: Vec<RolledChanceBranch>,
    },
    Terminal {
        payoff: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolledDecisionBranch {
    pub label: String,
    pub adjustment: f64,
    /// `adjustment + child.value`
    pub value: f64,
    pub child: RolledBackTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolledChanceBranch {
    pub label: String,
    pub probability: f64,
    pub child: RolledBackTree,
}

/// One decision along the optimal strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyStep {
    /// Branch labels from the root down to the decision node.
    pub context: Vec<String>,
    pub choice: String,
    /// Expected overall payoff at this node, counting adjustments already crossed.
    pub value: f64,
}

impl RolledBackTree {
    pub fn child(&self, index: usize) -> Option<&RolledBackTree> {
        match &self.node {
            RolledNode::Decision { branches, .. } => branches.get(index).map(|b| &b.child),
            RolledNode::Chance { branches } => branches.get(index).map(|b| &b.child),
            RolledNode::Terminal { .. } => None,
        }
    }

    pub fn descend(&self, path: &[usize]) -> Option<&RolledBackTree> {
        path.iter().try_fold(self, |node, &i| node.child(i))
    }

    /// Value of the node at `path` plus every cash adjustment crossed on
    /// the way down from the root: the expected overall payoff given that
    /// the process reaches this node and continues optimally.
    pub fn value_along(&self, path: &[usize]) -> Option<f64> {
        let mut node = self;
        let mut spent = 0.0;
        for &i in path {
            if let RolledNode::Decision { branches, .. } = &node.node {
                spent += branches.get(i)?.adjustment;
            }
            node = node.child(i)?;
        }
        Some(spent + node.value)
    }

    pub fn best_branch(&self) -> Option<usize> {
        match self.node {
            RolledNode::Decision { best, .. } => Some(best),
            _ => None,
        }
    }

    /// Optimal choices at every decision node reachable under the optimal
    /// strategy, in depth-first order.
    pub fn strategy(&self) -> Vec<StrategyStep> {
        let mut steps = Vec::new();
        self.collect_strategy(&mut Vec::new(), 0.0, &mut steps);
        steps
    }

    fn collect_strategy(&self, context: &mut Vec<String>, spent: f64, out: &mut Vec<StrategyStep>) {
        match &self.node {
            RolledNode::Terminal { .. } => {}
            RolledNode::Decision { best, branches } => {
                let b = &branches[*best];
                out.push(StrategyStep {
                    context: context.clone(),
                    choice: b.label.clone(),
                    value: spent + self.value,
                });
                context.push(b.label.clone());
                b.child.collect_strategy(context, spent + b.adjustment, out);
                context.pop();
            }
            RolledNode::Chance { branches } => {
                for (i, b) in branches.iter().enumerate() {
                    let label = if b.label.is_empty() {
                        format!("outcome {}", i + 1)
                    } else {
                        b.label.clone()
                    };
                    context.push(label);
                    b.child.collect_strategy(context, spent, out);
                    context.pop();
                }
            }
        }
    }
}

/// Expected-value rollback. Ties at decision nodes go to the earliest branch.
pub fn rollback(tree: &TreeNode) -> RolledBackTree {
    match tree {
        TreeNode::Terminal { payoff } => RolledBackTree {
            value: *payoff,
            node: RolledNode::Terminal { payoff: *payoff },
        },
        TreeNode::Chance { branches } => {
            let rolled: Vec<RolledChanceBranch> = branches
                .iter()
                .map(|b| RolledChanceBranch {
                    label: b.label.clone(),
                    probability: b.probability,
                    child: rollback(&b.child),
                })
                .collect();
            let value = rolled
                .iter()
                .fold(0.0, |acc, b| acc + b.probability * b.child.value);
            RolledBackTree {
                value,
                node: RolledNode::Chance { branches: rolled },
            }
        }
        TreeNode::Decision { branches } => {
            let rolled: Vec<RolledDecisionBranch> = branches
                .iter()
                .map(|b| {
                    let child = rollback(&b.child);
                    RolledDecisionBranch {
                        label: b.label.clone(),
                        adjustment: b.adjustment,
                        value: b.adjustment + child.value,
                        child,
                    }
                })
                .collect();
            let mut best = 0;
            for (i, b) in rolled.iter().enumerate().skip(1) {
                if b.value > rolled[best].value {
                    best = i;
                }
            }
            RolledBackTree {
                value: rolled.get(best).map_or(f64::NEG_INFINITY, |b| b.value),
                node: RolledNode::Decision {
                    best,
                    branches: rolled,
                },
            }
        }
    }
}

fn check_distribution(what: &str, dist: &[f64]) -> Result<(), TreeError> {
    let sum: f64 = dist.iter().sum();
    if dist.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(TreeError::InvalidDistribution {
            what: what.to_string(),
            sum,
        });
    }
    Ok(())
}

/// Unconditional outcome probabilities: `marginal[j] = sum_i prior[i] * conditional[i][j]`.
pub fn total_probability(prior: &[f64], conditional: &[Vec<f64>]) -> Result<Vec<f64>, TreeError> {
    if conditional.len() != prior.len() {
        return Err(TreeError::ShapeMismatch {
            what: "conditional matrix",
            len: conditional.len(),
            expected: prior.len(),
        });
    }
    check_distribution("prior", prior)?;
    let width = conditional.first().map_or(0, Vec::len);
    for (i, row) in conditional.iter().enumerate() {
        if row.len() != width {
            return Err(TreeError::ShapeMismatch {
                what: "conditional row",
                len: row.len(),
                expected: width,
            });
        }
        check_distribution(&format!("conditional row {}", i + 1), row)?;
    }
    Ok((0..width)
        .map(|j| {
            prior
                .iter()
                .zip(conditional)
                .fold(0.0, |acc, (p, row)| acc + p * row[j])
        })
        .collect())
}

/// Inputs of the regional-test / national-launch decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchParameters {
    pub regional_cost: f64,
    pub national_cost: f64,
    pub unit_profit: f64,
    /// Units sold regionally for each outcome (successful, mediocre, negative).
    pub regional_volumes: [f64; 3],
    pub national_volumes: [f64; 3],
    /// Probabilities of each regional outcome.
    pub prior: [f64; 3],
    /// `conditional[i][j]`: probability of national outcome `j` given regional outcome `i`.
    pub conditional: [[f64; 3]; 3],
}

pub const OUTCOME_LABELS: [&str; 3] = ["successful", "mediocre", "negative"];

impl LaunchParameters {
    /// Figures in thousands of dollars and thousands of units.
    pub fn example() -> Self {
        LaunchParameters {
            regional_cost: 4000.0,
            national_cost: 80000.0,
            unit_profit: 25.0,
            regional_volumes: [500.0, 200.0, 50.0],
            national_volumes: [10000.0, 5000.0, 1000.0],
            prior: [0.2, 0.7, 0.1],
            conditional: [[0.75, 0.2, 0.05], [0.35, 0.5, 0.15], [0.05, 0.3, 0.65]],
        }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        check_distribution("prior", &self.prior)?;
        for (i, row) in self.conditional.iter().enumerate() {
            check_distribution(&format!("conditional row {}", i + 1), row)?;
        }
        for (name, volumes) in [
            ("regional volume", &self.regional_volumes),
            ("national volume", &self.national_volumes),
        ] {
            if let Some(v) = volumes.iter().find(|v| !v.is_finite() || **v <= 0.0) {
                return Err(TreeError::Invalid {
                    path: "parameters".into(),
                    reason: format!("{name} {v} must be positive"),
                });
            }
        }
        for (name, x) in [
            ("regional cost", self.regional_cost),
            ("national cost", self.national_cost),
            ("unit profit", self.unit_profit),
        ] {
            if !x.is_finite() {
                return Err(TreeError::Invalid {
                    path: "parameters".into(),
                    reason: format!("{name} {x} is not finite"),
                });
            }
        }
        Ok(())
    }
}

/// Builds the three-way launch decision:
///
/// * go national directly: pay the national cost, then nature draws the
///   national outcome from the marginal distribution;
/// * test regionally: pay the regional cost, nature draws the regional
///   outcome from the prior, then decide between stopping (keep the
///   regional revenue) and going national (pay the national cost, national
///   outcome drawn from the matching conditional row, revenue from both
///   markets);
/// * do nothing.
pub fn build_product_launch_tree(params: &LaunchParameters) -> Result<TreeNode, TreeError> {
    params.validate()?;
    let conditional: Vec<Vec<f64>> = params.conditional.iter().map(|r| r.to_vec()).collect();
    let marginal = total_probability(&params.prior, &conditional)?;
    let national_revenue = params.national_volumes.map(|v| v * params.unit_profit);
    let regional_revenue = params.regional_volumes.map(|v| v * params.unit_profit);

    let national_chance = |probs: &[f64], extra: f64| TreeNode::Chance {
        branches: probs
            .iter()
            .zip(national_revenue)
            .zip(OUTCOME_LABELS)
            .map(|((&p, revenue), label)| ChanceBranch {
                label: format!("national {label}"),
                probability: p,
                child: TreeNode::terminal(revenue + extra),
            })
            .collect(),
    };

    let after_test = TreeNode::Chance {
        branches: (0..3)
            .map(|i| ChanceBranch {
                label: format!("regional {}", OUTCOME_LABELS[i]),
                probability: params.prior[i],
                child: TreeNode::Decision {
                    branches: vec![
                        DecisionBranch {
                            label: "stop".into(),
                            adjustment: 0.0,
                            child: TreeNode::terminal(regional_revenue[i]),
                        },
                        DecisionBranch {
                            label: "go national".into(),
                            adjustment: -params.national_cost,
                            child: national_chance(&conditional[i], regional_revenue[i]),
                        },
                    ],
                },
            })
            .collect(),
    };

    Ok(TreeNode::Decision {
        branches: vec![
            DecisionBranch {
                label: "go national directly".into(),
                adjustment: -params.national_cost,
                child: national_chance(&marginal, 0.0),
            },
            DecisionBranch {
                label: "test regionally".into(),
                adjustment: -params.regional_cost,
                child: after_test,
            },
            DecisionBranch {
                label: "do nothing".into(),
                adjustment: 0.0,
                child: TreeNode::terminal(0.0),
            },
        ],
    })
}

//! Shared fixtures, random generators and brute-force oracles for the
//! integration tests. Nothing here calls the solvers it is used to check.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use lifecycle::io::{parse_problem_file, Model};
use lifecycle::model::{ActionSpec, ControlledMarkovProblem};
use lifecycle::stages::{ControlDraft, StagedDraft, StagedModel, StateDraft, StateKind};
use lifecycle::tree::{ChanceBranch, DecisionBranch, TreeNode};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn dealership() -> ControlledMarkovProblem {
    match parse_problem_file(data_path("dealership.mdp"))
        .unwrap()
        .model
    {
        Model::Mdp(p) => p,
        other => panic!("unexpected kind {}", other.kind()),
    }
}

pub fn bundled_tree() -> TreeNode {
    match parse_problem_file(data_path("product-launch.tree"))
        .unwrap()
        .model
    {
        Model::Tree(t) => t,
        other => panic!("unexpected kind {}", other.kind()),
    }
}

pub fn bundled_staged(name: &str) -> StagedModel {
    match parse_problem_file(data_path(name)).unwrap().model {
        Model::Staged(m) => m,
        other => panic!("unexpected kind {}", other.kind()),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_distribution(rng: &mut impl Rng, n: usize, strictly_positive: bool) -> Vec<f64> {
    let lo = if strictly_positive { 0.05 } else { 0.0 };
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if !strictly_positive && rng.random_bool(0.3) {
                0.0
            } else {
                lo + rng.random::<f64>()
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    // Push the rounding residue into the largest entry so the row sums to 1.
    let residue = 1.0 - w.iter().sum::<f64>();
    let (imax, _) = w.iter().enumerate().fold(
        (0, f64::MIN),
        |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc },
    );
    w[imax] += residue;
    w
}

/// Random problem whose transition rows are strictly positive, so every
/// policy is ergodic.
pub fn random_ergodic_problem(
    rng: &mut impl Rng,
    max_states: usize,
    max_actions: usize,
) -> ControlledMarkovProblem {
    let n = rng.random_range(1..=max_states);
    let actions = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=max_actions);
            (0..k)
                .map(|a| ActionSpec {
                    label: format!("a{}", a + 1),
                    p: random_distribution(rng, n, true),
                    r: (0..n).map(|_| rng.random_range(-1000.0..1000.0)).collect(),
                })
                .collect()
        })
        .collect();
    ControlledMarkovProblem::new((1..=n).map(|i| format!("s{i}")).collect(), actions).unwrap()
}

/// Random tree with at most `max_decisions` decision nodes.
pub fn random_tree(rng: &mut impl Rng, max_decisions: usize) -> TreeNode {
    let mut budget = max_decisions;
    random_node(rng, &mut budget, 0)
}

fn random_node(rng: &mut impl Rng, budget: &mut usize, depth: usize) -> TreeNode {
    let roll = rng.random_range(0..10);
    if depth >= 5 || roll < 3 {
        return TreeNode::terminal(rng.random_range(-100.0..100.0f64).round());
    }
    if roll < 7 && *budget > 0 {
        *budget -= 1;
        let k = rng.random_range(1..=3);
        TreeNode::Decision {
            branches: (0..k)
                .map(|i| DecisionBranch {
                    label: format!("d{depth}.{i}"),
                    adjustment: rng.random_range(-20.0..20.0f64).round(),
                    child: random_node(rng, budget, depth + 1),
                })
                .collect(),
        }
    } else {
        let k = rng.random_range(1..=3);
        let probs = random_distribution(rng, k, false);
        TreeNode::Chance {
            branches: probs
                .into_iter()
                .map(|p| ChanceBranch {
                    label: String::new(),
                    probability: p,
                    child: random_node(rng, budget, depth + 1),
                })
                .collect(),
        }
    }
}

fn decision_count(node: &TreeNode) -> Vec<usize> {
    // Branch counts of decision nodes in depth-first order.
    let mut out = Vec::new();
    fn walk(node: &TreeNode, out: &mut Vec<usize>) {
        match node {
            TreeNode::Terminal { .. } => {}
            TreeNode::Decision { branches } => {
                out.push(branches.len());
                for b in branches {
                    walk(&b.child, out);
                }
            }
            TreeNode::Chance { branches } => {
                for b in branches {
                    walk(&b.child, out);
                }
            }
        }
    }
    walk(node, &mut out);
    out
}

/// Expected payoff of a pure strategy that fixes a branch at every
/// decision node (depth-first numbering).
fn strategy_payoff(node: &TreeNode, strategy: &[usize], next: &mut usize) -> f64 {
    match node {
        TreeNode::Terminal { payoff } => *payoff,
        TreeNode::Decision { branches } => {
            let me = *next;
            *next += 1;
            let mut chosen = 0.0;
            for (i, b) in branches.iter().enumerate() {
                // Walk every subtree so the numbering stays aligned.
                let v = b.adjustment + strategy_payoff(&b.child, strategy, next);
                if i == strategy[me] {
                    chosen = v;
                }
            }
            chosen
        }
        TreeNode::Chance { branches } => branches
            .iter()
            .map(|b| b.probability * strategy_payoff(&b.child, strategy, next))
            .sum(),
    }
}

/// Best expected payoff over every pure strategy.
pub fn tree_strategy_oracle(tree: &TreeNode) -> f64 {
    let counts = decision_count(tree);
    let total: usize = counts.iter().product();
    let mut best = f64::NEG_INFINITY;
    for mut idx in 0..total {
        let mut strategy = vec![0; counts.len()];
        for (slot, &k) in strategy.iter_mut().zip(&counts) {
            *slot = idx % k;
            idx /= k;
        }
        best = best.max(strategy_payoff(tree, &strategy, &mut 0));
    }
    best
}

fn label_of(t: usize, i: usize) -> String {
    format!("x{t}_{i}")
}

/// Random staged model with at most `max_controls` controls in total.
pub fn random_staged(rng: &mut impl Rng, max_controls: usize) -> StagedModel {
    loop {
        let stages_n = rng.random_range(1..=4);
        let widths: Vec<usize> = (0..stages_n).map(|_| rng.random_range(1..=3)).collect();
        let mut stages = Vec::new();
        let mut controls_used = 0;
        for t in 0..stages_n {
            let mut states = Vec::new();
            for i in 0..widths[t] {
                if t + 1 == stages_n {
                    states.push(StateDraft {
                        label: label_of(t, i),
                        controls: vec![],
                        terminal_reward: Some(rng.random_range(-10.0..10.0f64).round()),
                    });
                } else {
                    let k = rng.random_range(1..=2);
                    controls_used += k;
                    let controls = (0..k)
                        .map(|c| ControlDraft {
                            label: format!("u{t}_{i}_{c}"),
                            reward: rng.random_range(-5.0..5.0f64).round(),
                            dist: random_distribution(rng, widths[t + 1], false)
                                .into_iter()
                                .enumerate()
                                .map(|(j, p)| (label_of(t + 1, j), p))
                                .collect(),
                        })
                        .collect();
                    states.push(StateDraft {
                        label: label_of(t, i),
                        controls,
                        terminal_reward: None,
                    });
                }
            }
            stages.push(states);
        }
        if controls_used > max_controls {
            continue;
        }
        let initial: BTreeMap<String, f64> = random_distribution(rng, widths[0], false)
            .into_iter()
            .enumerate()
            .map(|(i, p)| (label_of(0, i), p))
            .collect();
        return StagedModel::try_from(StagedDraft {
            stages,
            initial,
            allow_substochastic: false,
        })
        .unwrap();
    }
}

/// Forward evaluation of every control assignment. Returns, per stage and
/// state, the best expected total reward starting from that state.
pub fn staged_forward_oracle(model: &StagedModel) -> Vec<Vec<f64>> {
    let mut slots = Vec::new();
    for t in 0..model.num_stages() {
        for (i, s) in model.stage(t).iter().enumerate() {
            if let StateKind::Controlled { controls } = &s.kind {
                slots.push((t, i, controls.len()));
            }
        }
    }
    let total: usize = slots.iter().map(|s| s.2).product();
    let mut best: Vec<Vec<f64>> = (0..model.num_stages())
        .map(|t| vec![f64::NEG_INFINITY; model.stage(t).len()])
        .collect();

    for mut idx in 0..total {
        let mut assignment: Vec<Vec<usize>> = (0..model.num_stages())
            .map(|t| vec![0; model.stage(t).len()])
            .collect();
        for &(t, i, k) in &slots {
            assignment[t][i] = idx % k;
            idx /= k;
        }
        for (t0, best_row) in best.iter_mut().enumerate() {
            for (i0, best_value) in best_row.iter_mut().enumerate() {
                let mut dist = vec![0.0; model.stage(t0).len()];
                dist[i0] = 1.0;
                let mut total_reward = 0.0;
                for t in t0..model.num_stages() {
                    let mut next = if t < model.horizon() {
                        vec![0.0; model.stage(t + 1).len()]
                    } else {
                        Vec::new()
                    };
                    for (i, &mass) in dist.iter().enumerate() {
                        if mass == 0.0 {
                            continue;
                        }
                        match &model.stage(t)[i].kind {
                            StateKind::Terminal { reward } => total_reward += mass * reward,
                            StateKind::Controlled { controls } => {
                                let u = &controls[assignment[t][i]];
                                total_reward += mass * u.reward;
                                for (j, p) in u.dist.iter().enumerate() {
                                    next[j] += mass * p;
                                }
                            }
                        }
                    }
                    dist = next;
                }
                *best_value = best_value.max(total_reward);
            }
        }
    }
    best
}

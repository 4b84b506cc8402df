//! Human and machine renderings of solver results.
//!
//! Every report is a plain serializable struct; the machine rendering is its
//! JSON form (full precision, round-trips exactly) and the human rendering
//! formats the same numbers to a fixed number of decimals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::howard::{gain_bias_residual, IterationTrace};
use crate::model::{policy_matrices, ControlledMarkovProblem, GrowthIndicators};
use crate::stages::{evaluate_initial, StageValues, StagedModel, StateKind};
use crate::tree::{RolledBackTree, RolledNode, StrategyStep};
use crate::validation::{EnumerationResult, SimulationReport};

pub const DEFAULT_PRECISION: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Human,
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HumanOptions {
    pub precision: usize,
    /// Print full per-iteration tables where a report has them.
    pub tables: bool,
}

impl Default for HumanOptions {
    fn default() -> Self {
        HumanOptions {
            precision: DEFAULT_PRECISION,
            tables: false,
        }
    }
}

pub trait Report: Serialize {
    fn human(&self, opts: &HumanOptions) -> String;
}

pub fn render_report<R: Report>(report: &R, mode: Mode, opts: &HumanOptions) -> String {
    match mode {
        Mode::Human => report.human(opts),
        Mode::Machine => {
            let mut s = serde_json::to_string_pretty(report).expect("reports always serialize");
            s.push('\n');
            s
        }
    }
}

fn num(x: f64, precision: usize) -> String {
    format!("{x:.precision$}")
}

fn join(policy: &[usize]) -> String {
    policy
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// 1-based action per state.
    pub policy: Vec<usize>,
    pub gain: f64,
    pub v: Vec<f64>,
    /// Max-norm residual of the value-determination equations.
    pub residual: f64,
    /// `test_values[i][k]`, indexed like the problem's actions.
    pub test_values: Vec<Vec<f64>>,
    pub improved_policy: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub states: Vec<String>,
    pub action_labels: Vec<Vec<String>>,
    /// 1-based.
    pub reference_state: usize,
    pub iterations: Vec<IterationReport>,
    pub final_policy: Vec<usize>,
    pub gain: Option<f64>,
}

impl SolveReport {
    pub fn from_trace(
        problem: &ControlledMarkovProblem,
        reference_state: usize,
        trace: &IterationTrace,
    ) -> Self {
        let iterations = trace
            .steps
            .iter()
            .enumerate()
            .map(|(i, step)| {
                let m = policy_matrices(problem, &step.policy).expect("trace policies are valid");
                IterationReport {
                    iteration: i + 1,
                    policy: step.policy.one_based(),
                    gain: step.solution.gain,
                    v: step.solution.v.clone(),
                    residual: gain_bias_residual(&m.p, &m.q, &step.solution),
                    test_values: step.improvement.test_values.clone(),
                    improved_policy: step.improvement.chosen.one_based(),
                }
            })
            .collect();
        SolveReport {
            states: problem.state_labels().to_vec(),
            action_labels: (0..problem.num_states())
                .map(|i| problem.actions(i).iter().map(|a| a.label.clone()).collect())
                .collect(),
            reference_state: reference_state + 1,
            iterations,
            final_policy: trace.policy.one_based(),
            gain: trace.steps.last().map(|s| s.solution.gain),
        }
    }
}

impl Report for SolveReport {
    fn human(&self, opts: &HumanOptions) -> String {
        let p = opts.precision;
        let mut out = String::new();
        writeln!(
            out,
            "Policy iteration: {} states, reference state {}",
            self.states.len(),
            self.reference_state
        )
        .unwrap();
        for it in &self.iterations {
            writeln!(out).unwrap();
            writeln!(
                out,
                "Iteration {}: policy {}  gain {}  -> improved policy {}",
                it.iteration,
                join(&it.policy),
                num(it.gain, p),
                join(&it.improved_policy)
            )
            .unwrap();
            if opts.tables {
                for (i, v) in it.v.iter().enumerate() {
                    writeln!(out, "  v{} = {}", i + 1, num(*v, p)).unwrap();
                }
                writeln!(out, "  residual {:.3e}", it.residual).unwrap();
                writeln!(out, "  {:>3} {:>3} {:>16}", "i", "k", "test value").unwrap();
                for (i, row) in it.test_values.iter().enumerate() {
                    for (k, t) in row.iter().enumerate() {
                        let mark = if it.improved_policy[i] == k + 1 {
                            "  +"
                        } else {
                            ""
                        };
                        writeln!(
                            out,
                            "  {:>3} {:>3} {:>16}{}",
                            i + 1,
                            k + 1,
                            num(*t, p),
                            mark
                        )
                        .unwrap();
                    }
                }
            }
        }
        if let Some(gain) = self.gain {
            writeln!(out).unwrap();
            writeln!(
                out,
                "Converged after {} iteration(s): policy {}  gain {}",
                self.iterations.len(),
                join(&self.final_policy),
                num(gain, p)
            )
            .unwrap();
            for (i, &k) in self.final_policy.iter().enumerate() {
                let label = self
                    .action_labels
                    .get(i)
                    .and_then(|l| l.get(k - 1))
                    .map_or("", String::as_str);
                writeln!(out, "  {}: action {} ({})", self.states[i], k, label).unwrap();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGain {
    pub policy: Vec<usize>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub policies_evaluated: u128,
    pub skipped: Vec<Vec<usize>>,
    pub best_policy: Vec<usize>,
    pub best_gain: f64,
    pub per_policy: Option<Vec<PolicyGain>>,
}

impl From<&EnumerationResult> for EnumerationReport {
    fn from(r: &EnumerationResult) -> Self {
        EnumerationReport {
            policies_evaluated: r.evaluated,
            skipped: r.skipped.iter().map(|p| p.one_based()).collect(),
            best_policy: r.best_policy.one_based(),
            best_gain: r.best_gain,
            per_policy: r.per_policy.as_ref().map(|list| {
                list.iter()
                    .map(|(policy, gain)| PolicyGain {
                        policy: policy.one_based(),
                        gain: *gain,
                    })
                    .collect()
            }),
        }
    }
}

impl Report for EnumerationReport {
    fn human(&self, opts: &HumanOptions) -> String {
        let p = opts.precision;
        let mut out = String::new();
        writeln!(out, "policies evaluated: {}", self.policies_evaluated).unwrap();
        writeln!(out, "multichain (skipped): {}", self.skipped.len()).unwrap();
        writeln!(
            out,
            "best policy: {}  gain {}",
            join(&self.best_policy),
            num(self.best_gain, p)
        )
        .unwrap();
        if let Some(list) = &self.per_policy {
            let mut ranked: Vec<&PolicyGain> = list.iter().collect();
            ranked.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.policy.cmp(&b.policy)));
            writeln!(out, "top policies:").unwrap();
            for pg in ranked.iter().take(5) {
                writeln!(out, "  {:<16} {}", join(&pg.policy), num(pg.gain, p)).unwrap();
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub policy: Vec<usize>,
    /// 1-based.
    pub start_state: usize,
    pub seed: u64,
    pub steps: u64,
    pub total_reward: f64,
    pub empirical_gain: f64,
    pub state_visit_frequencies: Vec<f64>,
}

impl SimulateReport {
    pub fn new(policy: Vec<usize>, report: &SimulationReport) -> Self {
        SimulateReport {
            policy,
            start_state: report.start_state + 1,
            seed: report.seed,
            steps: report.steps,
            total_reward: report.total_reward,
            empirical_gain: report.empirical_gain,
            state_visit_frequencies: report.state_visit_frequencies.clone(),
        }
    }
}

impl Report for SimulateReport {
    fn human(&self, opts: &HumanOptions) -> String {
        let p = opts.precision;
        let mut out = String::new();
        writeln!(
            out,
            "simulated policy {} from state {}: {} steps, seed {}",
            join(&self.policy),
            self.start_state,
            self.steps,
            self.seed
        )
        .unwrap();
        writeln!(out, "empirical gain: {}", num(self.empirical_gain, p)).unwrap();
        writeln!(out, "visit frequencies:").unwrap();
        for (i, f) in self.state_visit_frequencies.iter().enumerate() {
            writeln!(out, "  {:>3} {}", i + 1, num(*f, p.max(4))).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchValue {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub value: f64,
    /// `adjustment + child value` for each root branch, when the root is a decision.
    pub root_branches: Vec<BranchValue>,
    pub strategy: Vec<StrategyStep>,
    pub tree: RolledBackTree,
}

impl TreeReport {
    pub fn new(tree: RolledBackTree) -> Self {
        let root_branches = match &tree.node {
            RolledNode::Decision { branches, .. } => branches
                .iter()
                .map(|b| BranchValue {
                    label: b.label.clone(),
                    value: b.value,
                })
                .collect(),
            _ => Vec::new(),
        };
        TreeReport {
            value: tree.value,
            root_branches,
            strategy: tree.strategy(),
            tree,
        }
    }
}

impl Report for TreeReport {
    fn human(&self, opts: &HumanOptions) -> String {
        let p = opts.precision;
        let mut out = String::new();
        writeln!(out, "expected value: {}", num(self.value, p)).unwrap();
        if !self.root_branches.is_empty() {
            writeln!(out, "root options:").unwrap();
            for b in &self.root_branches {
                writeln!(out, "  {:<28} {}", b.label, num(b.value, p)).unwrap();
            }
        }
        writeln!(out, "optimal strategy:").unwrap();
        for step in &self.strategy {
            let at = if step.context.is_empty() {
                "start".to_string()
            } else {
                step.context.join(" / ")
            };
            writeln!(
                out,
                "  at {at}: {} (value {})",
                step.choice,
                num(step.value, p)
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlValue {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateValue {
    pub stage: usize,
    pub label: String,
    pub value: f64,
    pub optimal_control: Option<String>,
    pub controls: Vec<ControlValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagesReport {
    pub initial_value: f64,
    pub states: Vec<StateValue>,
    pub warnings: Vec<String>,
}

impl StagesReport {
    pub fn new(model: &StagedModel, values: &StageValues) -> Self {
        let mut states = Vec::new();
        for t in 0..model.num_stages() {
            for (i, s) in model.stage(t).iter().enumerate() {
                let (controls, optimal_control) = match &s.kind {
                    StateKind::Terminal { .. } => (Vec::new(), None),
                    StateKind::Controlled { controls } => (
                        controls
                            .iter()
                            .zip(values.control_values(t, i))
                            .map(|(u, &v)| ControlValue {
                                label: u.label.clone(),
                                value: v,
                            })
                            .collect(),
                        values
                            .optimal_control(t, i)
                            .map(|k| controls[k].label.clone()),
                    ),
                };
                states.push(StateValue {
                    stage: t,
                    label: s.label.clone(),
                    value: values.value(t, i),
                    optimal_control,
                    controls,
                });
            }
        }
        StagesReport {
            initial_value: evaluate_initial(model, values),
            states,
            warnings: model.warnings().to_vec(),
        }
    }
}

impl Report for StagesReport {
    fn human(&self, opts: &HumanOptions) -> String {
        let p = opts.precision;
        let mut out = String::new();
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        writeln!(
            out,
            "{:>5}  {:<12} {:>12}  optimal",
            "stage", "state", "value"
        )
        .unwrap();
        for s in &self.states {
            writeln!(
                out,
                "{:>5}  {:<12} {:>12}  {}",
                s.stage,
                s.label,
                num(s.value, p),
                s.optimal_control.as_deref().unwrap_or("-")
            )
            .unwrap();
            for u in &s.controls {
                writeln!(out, "{:>5}    {:<10} {:>12}", "", u.label, num(u.value, p)).unwrap();
            }
        }
        writeln!(
            out,
            "expected value under initial distribution: {}",
            num(self.initial_value, p)
        )
        .unwrap();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub kind: String,
    pub summary: String,
    pub warnings: Vec<String>,
}

impl Report for ValidateReport {
    fn human(&self, _opts: &HumanOptions) -> String {
        let mut out = format!("ok: {} ({})\n", self.kind, self.summary);
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        out
    }
}

impl Report for GrowthIndicators {
    fn human(&self, opts: &HumanOptions) -> String {
        let p = opts.precision;
        format!(
            "t = {}  x = {}\nrate V(t) = {}\nacceleration a(t) = {}\nstate: {}\n",
            num(self.t, p),
            num(self.x, p),
            num(self.rate, p),
            num(self.acceleration, p),
            self.state
        )
    }
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 parse or validation error, 2 numerical failure
//! (singular or multichain system, no convergence), 3 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::howard::{policy_iteration, SolveError, DEFAULT_MAX_ITERATIONS};
use crate::io::format::{parse_problem_file, Model, ProblemFile};
use crate::io::report::{
    render_report, EnumerationReport, HumanOptions, Mode, Report, SimulateReport, SolveReport,
    StagesReport, TreeReport, ValidateReport, DEFAULT_PRECISION,
};
use crate::model::{
    classify_growth, ControlledMarkovProblem, PolicyVector, DEFAULT_GROWTH_EPSILON,
};
use crate::stages::backward_induction;
use crate::tree::rollback;
use crate::validation::{exhaustive_gain_max, simulate, OracleError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// Overrides the number of decimals in human-readable output.
pub const PRECISION_ENV: &str = "LIFECYCLE_PRECISION";

#[derive(Debug, Parser)]
#[command(
    name = "lifecycle",
    version,
    about = "Company life-cycle decision model solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a problem file.
    Validate { file: PathBuf },
    /// Run policy iteration on an mdp file.
    Solve {
        file: PathBuf,
        /// Starting policy, 1-based actions, e.g. 1,1,1,1,1 (default: all first actions).
        #[arg(long, value_delimiter = ',')]
        initial_policy: Option<Vec<usize>>,
        /// 1-based state whose relative value is pinned to zero (default: last state).
        #[arg(long)]
        reference_state: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
        max_iterations: usize,
        /// Print relative values and full improvement tables for every iteration.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate every stationary policy of an mdp file.
    Enumerate {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Simulate a fixed policy and report the empirical gain.
    Simulate {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        policy: Vec<usize>,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        seed: u64,
        /// 1-based start state.
        #[arg(long, default_value_t = 1)]
        start: usize,
        #[arg(long)]
        json: bool,
    },
    /// Roll back a decision tree file.
    Tree {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Backward induction on a staged model file.
    Stages {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Growth rate and acceleration of a stock-price growth value.
    Classify {
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = DEFAULT_GROWTH_EPSILON)]
        epsilon: f64,
        #[arg(long)]
        json: bool,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

fn load(path: &PathBuf) -> Result<ProblemFile, Failure> {
    parse_problem_file(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: e.to_string(),
    })
}

fn expect_mdp(file: ProblemFile) -> Result<ControlledMarkovProblem, Failure> {
    match file.model {
        Model::Mdp(p) => Ok(p),
        other => Err(Failure::usage(format!(
            "expected an mdp file, got kind {:?}",
            other.kind()
        ))),
    }
}

fn one_based_index(value: usize, count: usize, what: &str) -> Result<usize, Failure> {
    if value == 0 || value > count {
        Err(Failure::usage(format!(
            "{what} {value} is outside 1..={count}"
        )))
    } else {
        Ok(value - 1)
    }
}

fn parse_policy(
    problem: &ControlledMarkovProblem,
    choice: &[usize],
) -> Result<PolicyVector, Failure> {
    PolicyVector::from_one_based(problem, choice)
        .map_err(|e| Failure::usage(format!("invalid policy: {e}")))
}

fn emit<R: Report>(report: &R, json: bool, opts: &HumanOptions) -> String {
    let mode = if json { Mode::Machine } else { Mode::Human };
    render_report(report, mode, opts)
}

fn precision_from_env() -> usize {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_PRECISION)
}

fn execute(command: Command) -> Result<String, Failure> {
    let mut opts = HumanOptions {
        precision: precision_from_env(),
        tables: false,
    };
    match command {
        Command::Validate { file } => {
            let file = load(&file)?;
            let summary = match &file.model {
                Model::Mdp(p) => format!(
                    "{} states, {} actions, {} policies",
                    p.num_states(),
                    p.action_counts().iter().sum::<usize>(),
                    p.policy_count()
                ),
                Model::Tree(t) => format!("{} decision nodes", t.decision_node_count()),
                Model::Staged(m) => {
                    format!("{} stages, {} controls", m.num_stages(), m.total_controls())
                }
            };
            let report = ValidateReport {
                kind: file.model.kind().to_string(),
                summary,
                warnings: file.warnings(),
            };
            Ok(report.human(&opts))
        }
        Command::Solve {
            file,
            initial_policy,
            reference_state,
            max_iterations,
            trace,
            json,
        } => {
            let problem = expect_mdp(load(&file)?)?;
            let n = problem.num_states();
            let initial = match initial_policy {
                Some(choice) => parse_policy(&problem, &choice)?,
                None => PolicyVector::first_actions(&problem),
            };
            let reference = one_based_index(reference_state.unwrap_or(n), n, "reference state")?;
            if max_iterations == 0 {
                return Err(Failure::usage("--max-iterations must be at least 1"));
            }
            let result = policy_iteration(&problem, &initial, reference, max_iterations).map_err(
                |e| match e {
                    SolveError::MultichainSuspected(_) | SolveError::MaxIterationsExceeded(_) => {
                        Failure::numerical(e.to_string())
                    }
                    other => Failure::usage(other.to_string()),
                },
            )?;
            opts.tables = trace;
            Ok(emit(
                &SolveReport::from_trace(&problem, reference, &result),
                json,
                &opts,
            ))
        }
        Command::Enumerate { file, json } => {
            let problem = expect_mdp(load(&file)?)?;
            let result = exhaustive_gain_max(&problem).map_err(|e| match e {
                OracleError::Model(_) => Failure::usage(e.to_string()),
                _ => Failure::numerical(e.to_string()),
            })?;
            Ok(emit(&EnumerationReport::from(&result), json, &opts))
        }
        Command::Simulate {
            file,
            policy,
            steps,
            seed,
            start,
            json,
        } => {
            let problem = expect_mdp(load(&file)?)?;
            let policy = parse_policy(&problem, &policy)?;
            let start = one_based_index(start, problem.num_states(), "start state")?;
            if steps == 0 {
                return Err(Failure::usage("--steps must be at least 1"));
            }
            let report = simulate(&problem, &policy, start, steps, seed)
                .map_err(|e| Failure::usage(e.to_string()))?;
            Ok(emit(
                &SimulateReport::new(policy.one_based(), &report),
                json,
                &opts,
            ))
        }
        Command::Tree { file, json } => match load(&file)?.model {
            Model::Tree(tree) => Ok(emit(&TreeReport::new(rollback(&tree)), json, &opts)),
            other => Err(Failure::usage(format!(
                "expected a tree file, got kind {:?}",
                other.kind()
            ))),
        },
        Command::Stages { file, json } => match load(&file)?.model {
            Model::Staged(model) => {
                let values = backward_induction(&model);
                Ok(emit(&StagesReport::new(&model, &values), json, &opts))
            }
            other => Err(Failure::usage(format!(
                "expected a staged file, got kind {:?}",
                other.kind()
            ))),
        },
        Command::Classify {
            t,
            x,
            epsilon,
            json,
        } => {
            let indicators =
                classify_growth(t, x, epsilon).map_err(|e| Failure::usage(e.to_string()))?;
            Ok(emit(&indicators, json, &opts))
        }
    }
}

/// Runs the CLI with `args` (program name first), writing results to `out`
/// and diagnostics to `err`. Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

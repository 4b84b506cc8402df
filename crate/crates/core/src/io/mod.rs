//! Problem files and report rendering.

pub mod format;
pub mod report;

pub use format::{
    parse_problem_file, parse_problem_str, render_problem_file, FormatError, Model, ProblemFile,
};
pub use report::{render_report, HumanOptions, Mode, Report};

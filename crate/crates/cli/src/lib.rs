//! Problem-file parsing, reports and the `riskcalc` command line.

pub mod commands;
pub mod diag;
pub mod problem;
pub mod report;

pub use commands::run;
pub use diag::{Code, Diagnostic};
pub use problem::{parse_problem, parse_problem_str, ProblemFile};
pub use report::Report;

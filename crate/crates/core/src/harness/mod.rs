//! End-to-end experiments: problem files, ε-sweeps, escape detection and
//! the built-in corpus.

pub mod corpus;
pub mod problem;
pub mod run;
pub mod sweep;

pub use problem::{load_problem, Expected, ProblemDefinition, ProblemError};
pub use run::{run_all, run_problem, ProblemReport, RunAllReport, RunOptions};
pub use sweep::{detect_escape, run_epsilon_sweep, EscapeError, EscapeReport, EscapeVerdict, SweepSettings};

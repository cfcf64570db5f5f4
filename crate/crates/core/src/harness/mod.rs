//! Experiment driver: test problems, step policies, runs, convergence
//! tables and file output.

pub mod config;
pub mod output;
pub mod policy;
pub mod problems;
pub mod run;

pub use config::{ConfigFile, ExperimentConfig, NormName, PolicyKind, ProblemKind, SchemeKind, Study};
pub use policy::{rate_table, step_sequence, steps_covering, RateRow, StepPolicy};
pub use problems::{manufactured2d, random2d, wave1d, ExactSolution, TestProblem};
pub use run::{converge_space, converge_time, run_manufactured2d, run_random2d, run_single, run_wave1d, RunReport, StudyReport};

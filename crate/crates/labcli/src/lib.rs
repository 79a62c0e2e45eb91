//! Scenario files, experiment runners, acceptance criteria and reports for
//! the `lab` command-line tool.
//!
//! A [`Scenario`](scenario::Scenario) is read from TOML and validated in full
//! before anything runs. Each [`Experiment`](experiments::Experiment) produces
//! [`Record`](report::Record)s, each tied to at most one acceptance criterion,
//! which are collected into a schema-versioned [`Report`](report::Report).

pub mod criteria;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod scenario;

pub use criteria::Tolerances;
pub use experiments::{converge, run_experiment, write_outputs, Experiment, RunError};
pub use report::{CriterionId, Record, Report, Verdict};
pub use scenario::{Scenario, ScenarioError};

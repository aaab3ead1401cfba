//! Configuration-driven experiment runs behind the `aoimec` binary.

pub mod check;
pub mod commands;
pub mod spec;
pub mod stats;

pub use check::{run_checks, CheckResult};
pub use commands::{cmd_compare, cmd_eval, cmd_sweep, cmd_train, CompareReport, RunResult, SweepReport};
pub use spec::{ExperimentSpec, SweepVar};

//! Scenario runner for `hmod-core`: JSON scenarios in, JSON reports out.

pub mod run;
pub mod scenario;
pub mod trace;

pub use run::{run, CheckResult, RunOptions, RunReport};
pub use scenario::{builtin, list_scenarios, CheckKind, InputError, Scenario, Space};

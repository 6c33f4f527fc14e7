//! Scenario files, output formats and the parallel executor behind `sim`.

pub mod exec;
pub mod report;
pub mod run;
pub mod scenario;

pub use exec::RayonExecutor;
pub use report::{Outcome, Table};
pub use run::{run, RunError};
pub use scenario::{Experiment, Scenario, ScenarioError};

//! Scenario files, the command-line stages built on them, the stability
//! and nonuniqueness experiments, and report emission.

mod config;
mod demo;
mod report;
mod scenario;
mod stability;

pub use config::{
    load_config, Diagnostic, FlowSpec, GridSpec, OracleSpec, Overrides, Scenario, ScenarioConfig, SolutionSource,
    StabilitySpec,
};
pub use demo::{nonuniqueness_demo, NonuniquenessReport, LAMBDAS};
pub use report::{emit_report, write_table, Assertion, Cell, Relation, Summary, Table};
pub use scenario::{oracle_transport, run_scenario, Command};
pub use stability::{
    limit_solutions, stability_experiment, ConvergenceReport, LimitSolutions, Sequence, StabilityRow, Verdict,
};

/// The shipped `(-sgn x1, 0)` reference scenario.
pub const SGN2D_REFERENCE: &str = include_str!("../../scenarios/sgn2d-reference.json");

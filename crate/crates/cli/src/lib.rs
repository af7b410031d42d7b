//! Scenario files, experiment sweeps and result tables for `nbs-airtime`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plotdata;
pub mod verify;

pub use config::{emit_scenario, load_scenario, parse_scenario, LoadedScenario, ScenarioFile, SweepVariable};
pub use error::{ConfigError, PlotError};
pub use experiment::{run_experiment, ExperimentOutput, ResultRow};
pub use plotdata::{emit_plotdata, load_results};

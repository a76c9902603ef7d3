//! Library side of the `opinion-lab` command line tool: scenario loading,
//! runners for each subcommand and the files they write.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod catalog;
pub mod config;
pub mod expr;
pub mod report;
pub mod run;

pub use config::{load_config, load_config_with, ConfigError, Overrides, ScenarioConfig};
pub use run::{run_counterexample, run_picard, run_simulation, RunError, RunMeta, RunReport};

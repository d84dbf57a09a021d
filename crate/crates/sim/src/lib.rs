//! Configuration-driven scenario runner around `jmgt-core`.
//!
//! A TOML file ([`config`]) selects a scenario; [`scenario::run_scenario`]
//! executes it and writes `energies.csv` plus a `checks.json` verdict.

// negated comparisons are NaN-safe on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{parse_config, ConfigError, RunConfig, Scenario, ScenarioKind};
pub use output::{Verdict, ENERGY_COLUMNS};
pub use scenario::{run_scenario, RunError};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "JMGT_SIM_OUT";

//! Scenario configuration, study drivers, tabular output and the CLI.

pub mod cli;
pub mod config;
pub mod output;
pub mod studies;

pub use cli::cli_main;
pub use config::ScenarioConfig;
pub use output::{Cell, ResultTable};
pub use studies::{
    run_all, run_correlation_study, run_geometry_study, run_hw_ceiling_study, run_ioo_study, run_pn_floor_study,
    run_regime_map, run_study, STUDY_IDS,
};

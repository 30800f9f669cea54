//! Experiment driver for decision-focused economic dispatch: config files,
//! benchmark runs and versioned reports.

pub mod bench;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;

pub use config::ExperimentConfig;
pub use experiment::Infeasible;
pub use report::ExperimentReport;

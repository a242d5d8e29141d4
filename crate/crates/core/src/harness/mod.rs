//! Scenario configuration, experiment orchestration, CSV output and the CLI.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod manifest;

pub use config::{LinkBudget, ScenarioConfig};
pub use experiments::{
    run_cdf, run_se_curve, run_validation, CdfResult, CdfSeries, Scenario, SeCurve, SeCurvePoint, TauChoice,
    ValidationReport,
};
pub use manifest::{execute, replay, Job, Manifest};

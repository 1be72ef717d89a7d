//! Declarative experiments: config, validation, orchestration, persistence.

pub mod config;
pub mod demos;
pub mod runner;

pub use config::{
    apply_override, validate_config, ExperimentConfig, OutputSpec, RenewalClaims, ResolvedConfig,
    Suite, SCHEMA_VERSION,
};
pub use demos::{demo_config, DEMO_NAMES};
pub use runner::{
    execute, persist, run_experiment, RunManifest, RunResult, SuiteEntry, SuiteOutput,
};

//! Built-in experiment templates, one per characterization they exercise.

use super::config::{ExperimentConfig, OutputSpec, RenewalClaims, Suite, SCHEMA_VERSION};
use crate::distributions::{ClaimSpec, MixingSpec};
use crate::error::{Error, Result};
use crate::harness::FamilyOptions;
use crate::process::{ProcessKind, DEFAULT_MAX_EVENTS};

pub const DEMO_NAMES: [&str; 5] = [
    "watanabe",
    "cmpp-gamma",
    "cmpp-discrete",
    "renewal-counterexample",
    "claims-unit-reduction",
];

const DEMO_SEED: u64 = 1;

fn base(kind: ProcessKind, name: &str) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        kind,
        mixing: None,
        claims: None,
        interarrival: None,
        renewal_claims: RenewalClaims::Independent,
        horizon: 2.0,
        grid: vec![0.0, 0.5, 1.0, 2.0],
        n_paths: 100_000,
        calibration_paths: 10_000,
        master_seed: DEMO_SEED,
        alpha: 0.01,
        suites: Vec::new(),
        strata: None,
        functionals: FamilyOptions::default(),
        pairs: None,
        wald_times: None,
        conditional_wald_time: None,
        watanabe_times: None,
        pmf_n_max: 3,
        max_events: DEFAULT_MAX_EVENTS,
        output: OutputSpec {
            dir: format!("cmpplab-out/{name}"),
            dump_paths: false,
        },
    }
}

/// The named demo config.
pub fn demo_config(name: &str) -> Result<ExperimentConfig> {
    let c = match name {
        "watanabe" => ExperimentConfig {
            mixing: Some(MixingSpec::Degenerate { value: 2.0 }),
            claims: Some(ClaimSpec::Exponential { rate: 1.0 }),
            suites: vec![Suite::Watanabe, Suite::Wald, Suite::PmfCheck],
            ..base(ProcessKind::Cpp, name)
        },
        "cmpp-gamma" => ExperimentConfig {
            mixing: Some(MixingSpec::Gamma {
                shape: 2.0,
                rate: 1.0,
            }),
            claims: Some(ClaimSpec::Exponential { rate: 1.0 }),
            suites: vec![
                Suite::MartingaleM,
                Suite::MartingaleL,
                Suite::Wald,
                Suite::ConditionalWald,
                Suite::PmfCheck,
            ],
            ..base(ProcessKind::Cmpp, name)
        },
        "cmpp-discrete" => ExperimentConfig {
            mixing: Some(MixingSpec::Discrete {
                atoms: vec![1.0, 3.0],
                weights: vec![0.5, 0.5],
            }),
            claims: Some(ClaimSpec::Exponential { rate: 1.0 }),
            strata: Some(vec![2.0]),
            suites: vec![
                Suite::MartingaleM,
                Suite::MartingaleL,
                Suite::Stratified,
                Suite::ConditionalWald,
                Suite::Wald,
                Suite::PmfCheck,
            ],
            ..base(ProcessKind::Cmpp, name)
        },
        "renewal-counterexample" => ExperimentConfig {
            interarrival: Some(ClaimSpec::Degenerate { value: 0.5 }),
            claims: Some(ClaimSpec::Degenerate { value: 1.0 }),
            grid: vec![0.0, 0.75, 1.5, 2.0],
            n_paths: 10_000,
            calibration_paths: 1_000,
            suites: vec![Suite::MartingaleL, Suite::MartingaleM],
            ..base(ProcessKind::Renewal, name)
        },
        "claims-unit-reduction" => ExperimentConfig {
            mixing: Some(MixingSpec::Gamma {
                shape: 2.0,
                rate: 1.0,
            }),
            claims: Some(ClaimSpec::Degenerate { value: 1.0 }),
            suites: vec![Suite::MartingaleM, Suite::MartingaleL, Suite::Wald],
            ..base(ProcessKind::Cmpp, name)
        },
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown demo `{other}`; available: {}",
                DEMO_NAMES.join(", ")
            )))
        }
    };
    Ok(c)
}

//! Simulation laboratory for compound mixed Poisson risk processes.
//!
//! Paths are built in two stages: draw the structural parameter Θ from a
//! mixing law, then run a compound Poisson path at rate Θ. The harness
//! checks by Monte Carlo that `S_t − tΘE[X₁]` and `N_t − tΘ` behave as
//! martingales on such paths and fail to on renewal counterexamples.
//!
//! * [`distributions`]: mixing and claim laws, moments, the mixed Poisson pmf.
//! * [`process`]: path simulation, `N_t`, `S_t`, increments.
//! * [`harness`]: compensated series and the hypothesis tests.
//! * [`experiment`]: declarative configs, runs, persisted reports.

// `!(a < b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod process;
pub mod rng;

pub use distributions::{
    claim_mean, mixed_poisson_pmf, mixing_mean, sample_claim, sample_mixing, ClaimLaw, ClaimSpec,
    MixingLaw, MixingSpec,
};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, validate_config, ExperimentConfig, RunManifest, RunResult, Suite,
};
pub use harness::{
    compensate, conditional_wald_check, martingale_test, stratified_martingale_test, wald_check,
    watanabe_check, CompensatedSeries, FunctionalSpec, MartingaleReport, Series, Strata, TestPlan,
};
pub use process::{
    increments, simulate_cmpp_path, simulate_cpp_path, simulate_renewal_path, Observable,
    ProcessKind, ProcessModel, RiskPath, TimeGrid, DEFAULT_MAX_EVENTS,
};
pub use rng::{Domain, PathStreams, StreamFactory};

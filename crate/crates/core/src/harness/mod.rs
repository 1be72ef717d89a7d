//! Compensated processes and the Monte Carlo tests run on them.

pub mod compensate;
pub mod functional;
pub mod martingale;
pub mod moments;
pub mod summation;
pub mod watanabe;

pub use compensate::{
    compensate, compensate_at_rate, compensate_ensemble, CompensatedSeries, Series,
};
pub use functional::{all_pairs, FamilyOptions, FunctionalSpec, PairPlan, TestPlan, Variable};
pub use martingale::{
    martingale_test, stratified_martingale_test, Exclusion, ExclusionReason, FunctionalResult,
    MartingaleReport, PairResult, ReportMetadata, Strata, StratumSummary, DEFAULT_ALPHA,
    MIN_ENSEMBLE_PATHS, MIN_STRATUM_PATHS,
};
pub use moments::{
    conditional_wald_check, pmf_check, wald_check, ConditionalWaldEntry, ConditionalWaldReport,
    ConditioningEvent, TestRecord, MOMENT_BAND_SE,
};
pub use watanabe::{poisson_chi_square, watanabe_check, ChiSquareRecord, WatanabeReport};

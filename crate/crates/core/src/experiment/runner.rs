use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ResolvedConfig, Suite, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::harness::{
    compensate_ensemble, conditional_wald_check, martingale_test, moments, pmf_check,
    stratified_martingale_test, wald_check, watanabe_check, ConditioningEvent, MartingaleReport,
    Series, TestPlan, TestRecord,
};
use crate::process::{write_paths_csv, ProcessKind, ProcessModel, RiskPath};
use crate::rng::Domain;

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serialized output of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    pub suite: Suite,
    pub accept: bool,
    pub json: Vec<u8>,
    pub csv: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub suite: Suite,
    pub accept: bool,
    pub report_json: String,
    pub report_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub kind: ProcessKind,
    pub n_paths: usize,
    pub accept: bool,
    pub suites: Vec<SuiteEntry>,
    pub paths_csv: Option<String>,
    pub wall_clock_seconds: f64,
    pub software_version: String,
}

/// Everything a run produces, before anything touches the filesystem.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub manifest: RunManifest,
    pub outputs: Vec<SuiteOutput>,
    pub paths_csv: Option<Vec<u8>>,
}

impl RunResult {
    pub fn accept(&self) -> bool {
        self.manifest.accept
    }

    pub fn output(&self, suite: Suite) -> Option<&SuiteOutput> {
        self.outputs.iter().find(|o| o.suite == suite)
    }
}

#[derive(Serialize)]
struct RecordsReport<'a> {
    suite: &'a str,
    seed: u64,
    kind: ProcessKind,
    paths: usize,
    accept: bool,
    records: &'a [TestRecord],
}

#[derive(Serialize)]
struct StratifiedReport<'a> {
    accept: bool,
    m: &'a MartingaleReport,
    l: &'a MartingaleReport,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn records_output(
    suite: Suite,
    config: &ExperimentConfig,
    records: &[TestRecord],
) -> Result<SuiteOutput> {
    let accept = records.iter().all(|r| r.accept);
    let json = to_json(&RecordsReport {
        suite: suite.name(),
        seed: config.master_seed,
        kind: config.kind,
        paths: config.n_paths,
        accept,
        records,
    })?;
    let mut csv = Vec::new();
    moments::write_records_csv(suite.name(), records, &mut csv)?;
    Ok(SuiteOutput {
        suite,
        accept,
        json,
        csv,
    })
}

fn stamp(mut report: MartingaleReport, config: &ExperimentConfig) -> MartingaleReport {
    report.metadata.seed = Some(config.master_seed);
    report.metadata.kind = Some(config.kind);
    report
}

/// Nominal Θ of the ensemble for suites that need a single rate.
fn nominal_rate(resolved: &ResolvedConfig) -> f64 {
    match &resolved.model {
        ProcessModel::Cpp { theta, .. } => *theta,
        ProcessModel::Cmpp { mixing, .. } => mixing.mean(),
        ProcessModel::Renewal { interarrival, .. }
        | ProcessModel::CoupledRenewal { interarrival } => 1.0 / interarrival.mean(),
    }
}

fn run_suite(
    suite: Suite,
    config: &ExperimentConfig,
    resolved: &ResolvedConfig,
    paths: &[RiskPath],
    plan: Option<&TestPlan>,
) -> Result<SuiteOutput> {
    let claim_mean = resolved.model.claim_mean();
    let grid = &resolved.grid;
    let plan = || plan.expect("plan built for functional suites");
    match suite {
        Suite::MartingaleM | Suite::MartingaleL | Suite::Stratified => {
            let ensemble = compensate_ensemble(paths, grid, claim_mean)?;
            let run = |series| -> Result<MartingaleReport> {
                let report = if suite == Suite::Stratified {
                    stratified_martingale_test(
                        &ensemble,
                        series,
                        plan(),
                        config.alpha,
                        &resolved.strata,
                    )?
                } else {
                    martingale_test(&ensemble, series, plan(), config.alpha)?
                };
                Ok(stamp(report, config))
            };
            let (accept, json, csv) = match suite {
                Suite::Stratified => {
                    let m = run(Series::M)?;
                    let l = run(Series::L)?;
                    let accept = m.accept && l.accept;
                    let json = to_json(&StratifiedReport {
                        accept,
                        m: &m,
                        l: &l,
                    })?;
                    let mut csv = Vec::new();
                    m.write_csv(suite.name(), &mut csv)?;
                    let mut l_csv = Vec::new();
                    l.write_csv(suite.name(), &mut l_csv)?;
                    // Drop the second header row.
                    let body = l_csv.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
                    csv.extend_from_slice(&l_csv[body..]);
                    (accept, json, csv)
                }
                _ => {
                    let series = if suite == Suite::MartingaleM {
                        Series::M
                    } else {
                        Series::L
                    };
                    let report = run(series)?;
                    let mut csv = Vec::new();
                    report.write_csv(suite.name(), &mut csv)?;
                    (report.accept, to_json(&report)?, csv)
                }
            };
            Ok(SuiteOutput {
                suite,
                accept,
                json,
                csv,
            })
        }
        Suite::Wald => {
            let times = config
                .wald_times
                .clone()
                .unwrap_or_else(|| grid.points().to_vec());
            let mixing_mean = nominal_rate(resolved);
            let records = times
                .iter()
                .map(|&t| wald_check(paths, t, mixing_mean, claim_mean))
                .collect::<Result<Vec<_>>>()?;
            records_output(suite, config, &records)
        }
        Suite::PmfCheck => {
            let mixing = resolved
                .mixing
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("pmf_check needs a mixing law".into()))?;
            let mut records = Vec::new();
            for &t in grid.points().iter().filter(|&&t| t > 0.0) {
                records.extend(pmf_check(paths, mixing, t, config.pmf_n_max)?);
            }
            records_output(suite, config, &records)
        }
        Suite::ConditionalWald => {
            let t = config.conditional_wald_time.unwrap_or_else(|| grid.last());
            let events = ConditioningEvent::default_family(grid.points(), t);
            let report = conditional_wald_check(
                paths,
                t,
                claim_mean,
                &events,
                &resolved.strata,
                config.alpha,
            )?;
            let mut csv = Vec::new();
            report.write_csv(suite.name(), &mut csv)?;
            Ok(SuiteOutput {
                suite,
                accept: report.accept,
                json: to_json(&report)?,
                csv,
            })
        }
        Suite::Watanabe => {
            let theta0 = nominal_rate(resolved);
            let times = config
                .watanabe_times
                .clone()
                .unwrap_or_else(|| grid.points().iter().copied().filter(|&t| t > 0.0).collect());
            let mut report = watanabe_check(paths, theta0, grid, plan(), &times, config.alpha)?;
            report.martingale = stamp(report.martingale, config);
            let mut csv = Vec::new();
            report.write_csv(suite.name(), &mut csv)?;
            Ok(SuiteOutput {
                suite,
                accept: report.accept,
                json: to_json(&report)?,
                csv,
            })
        }
    }
}

/// Simulates the ensemble once and evaluates every selected suite on it.
/// Nothing is written to disk.
pub fn execute(config: &ExperimentConfig) -> Result<RunResult> {
    let started = Instant::now();
    let resolved = config.resolve()?;
    let suites = config.suite_list();
    let paths = resolved.model.simulate_ensemble(
        config.horizon,
        config.n_paths,
        config.master_seed,
        Domain::Test,
        config.max_events,
    )?;
    let plan = if suites.iter().any(|s| s.uses_functionals()) {
        let calibration = resolved.model.simulate_ensemble(
            config.horizon,
            config.calibration_paths,
            config.master_seed,
            Domain::Calibration,
            config.max_events,
        )?;
        let series =
            compensate_ensemble(&calibration, &resolved.grid, resolved.model.claim_mean())?;
        Some(TestPlan::calibrated(
            &series,
            &resolved.pairs,
            &config.functionals,
        )?)
    } else {
        None
    };
    let outputs = suites
        .iter()
        .map(|&s| {
            run_suite(s, config, &resolved, &paths, plan.as_ref()).map_err(|e| e.in_suite(s.name()))
        })
        .collect::<Result<Vec<_>>>()?;
    let paths_csv = if config.output.dump_paths {
        let mut buf = Vec::new();
        write_paths_csv(&paths, &mut buf)?;
        Some(buf)
    } else {
        None
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        seed: config.master_seed,
        kind: config.kind,
        n_paths: config.n_paths,
        accept: outputs.iter().all(|o| o.accept),
        suites: outputs
            .iter()
            .map(|o| SuiteEntry {
                suite: o.suite,
                accept: o.accept,
                report_json: format!("reports/{}.json", o.suite.name()),
                report_csv: format!("reports/{}.csv", o.suite.name()),
            })
            .collect(),
        paths_csv: paths_csv.as_ref().map(|_| "paths.csv".to_string()),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        software_version: SOFTWARE_VERSION.to_string(),
    };
    Ok(RunResult {
        manifest,
        outputs,
        paths_csv,
    })
}

/// Writes a finished run under `dir`: reports first, manifest last. Files
/// are staged in a scratch directory and renamed into place, so an
/// interrupted write never leaves a manifest pointing at missing reports.
pub fn persist(result: &RunResult, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("reports"))?;
    let staging = tempfile::Builder::new()
        .prefix(".cmpplab-staging")
        .tempdir_in(dir)?;
    let mut files: Vec<(PathBuf, &[u8])> = Vec::new();
    for o in &result.outputs {
        files.push((
            PathBuf::from(format!("reports/{}.json", o.suite.name())),
            &o.json,
        ));
        files.push((
            PathBuf::from(format!("reports/{}.csv", o.suite.name())),
            &o.csv,
        ));
    }
    if let Some(csv) = &result.paths_csv {
        files.push((PathBuf::from("paths.csv"), csv));
    }
    let manifest = to_json(&result.manifest)?;
    files.push((PathBuf::from("manifest.json"), &manifest));
    fs::create_dir_all(staging.path().join("reports"))?;
    for (rel, bytes) in &files {
        fs::write(staging.path().join(rel), bytes)?;
    }
    for (rel, _) in &files {
        fs::rename(staging.path().join(rel), dir.join(rel))?;
    }
    Ok(dir.join("manifest.json"))
}

/// Runs `config` and writes its reports under `config.output.dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    let result = execute(config)?;
    persist(&result, Path::new(&config.output.dir))?;
    Ok(result.manifest)
}

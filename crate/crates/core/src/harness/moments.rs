//! Moment checks: the Wald identity `E[S_t] = t·E[Θ]·E[X₁]`, its per-stratum
//! conditional form, and the empirical mixed Poisson pmf.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::functional::{FunctionalSpec, Variable};
use super::martingale::{
    check_alpha, summarize_strata, z_and_p, Exclusion, ExclusionReason, Strata, StratumSummary,
    MIN_ENSEMBLE_PATHS, MIN_STRATUM_PATHS,
};
use super::summation::accumulate;
use crate::distributions::{mixed_poisson_pmf, MixingLaw};
use crate::error::{Error, Result};
use crate::process::RiskPath;

/// Moment checks accept within this many standard errors.
pub const MOMENT_BAND_SE: f64 = 4.0;

/// One moment compared against its closed-form target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub name: String,
    pub t: f64,
    pub target: f64,
    pub estimate: f64,
    pub stderr: f64,
    #[serde(with = "super::martingale::zscore")]
    pub z: f64,
    pub accept: bool,
}

impl TestRecord {
    fn new(name: String, t: f64, target: f64, estimate: f64, stderr: f64) -> Self {
        let (z, _) = z_and_p(estimate - target, stderr);
        let accept = if stderr > 0.0 {
            (estimate - target).abs() <= MOMENT_BAND_SE * stderr
        } else {
            estimate == target
        };
        Self {
            name,
            t,
            target,
            estimate,
            stderr,
            z,
            accept,
        }
    }
}

pub fn write_records_csv<W: Write>(suite: &str, records: &[TestRecord], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "suite", "name", "t", "target", "estimate", "stderr", "z", "accept",
    ])?;
    for r in records {
        out.write_record([
            suite.to_string(),
            r.name.clone(),
            r.t.to_string(),
            r.target.to_string(),
            r.estimate.to_string(),
            r.stderr.to_string(),
            r.z.to_string(),
            r.accept.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn check_paths(paths: &[RiskPath], t: f64) -> Result<()> {
    if paths.len() < MIN_ENSEMBLE_PATHS {
        return Err(Error::InsufficientPaths {
            got: paths.len(),
            need: MIN_ENSEMBLE_PATHS,
        });
    }
    if let Some(p) = paths.iter().find(|p| !(t >= 0.0 && t <= p.horizon())) {
        return Err(Error::OutOfHorizon {
            t,
            horizon: p.horizon(),
        });
    }
    Ok(())
}

/// Empirical mean of `S_t` against `t·E[Θ]·E[X₁]`.
pub fn wald_check(
    paths: &[RiskPath],
    t: f64,
    mixing_mean: f64,
    claim_mean: f64,
) -> Result<TestRecord> {
    check_paths(paths, t)?;
    let m = accumulate(paths, 1, |p, acc| {
        acc[0].push(p.aggregate_at(t).expect("t checked against horizon"))
    });
    Ok(TestRecord::new(
        "E[S_t]".into(),
        t,
        t * mixing_mean * claim_mean,
        m[0].mean(),
        m[0].std_error(),
    ))
}

/// Empirical `P(N_t = n)` for `n = 0..=n_max` against the mixed Poisson pmf.
///
/// Standard errors use the hypothesized probability, `sqrt(p(1−p)/paths)`.
pub fn pmf_check(
    paths: &[RiskPath],
    mixing: &MixingLaw,
    t: f64,
    n_max: u64,
) -> Result<Vec<TestRecord>> {
    check_paths(paths, t)?;
    let width = n_max as usize + 1;
    let m = accumulate(paths, width, |p, acc| {
        let n = p.count_at(t).expect("t checked against horizon");
        for (k, slot) in acc.iter_mut().enumerate() {
            slot.push(if n == k { 1.0 } else { 0.0 });
        }
    });
    let total = paths.len() as f64;
    (0..=n_max)
        .map(|n| {
            let p = mixed_poisson_pmf(mixing, t, n)?;
            let stderr = (p * (1.0 - p) / total).sqrt();
            Ok(TestRecord::new(
                format!("P(N_t={n})"),
                t,
                p,
                m[n as usize].mean(),
                stderr,
            ))
        })
        .collect()
}

/// An event `A` observed at time `u`, realized as an indicator (or
/// constant) functional of `(N_u, Θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningEvent {
    pub u: f64,
    pub functional: FunctionalSpec,
}

impl ConditioningEvent {
    /// The whole space.
    pub fn everything() -> Self {
        Self {
            u: 0.0,
            functional: FunctionalSpec::constant(),
        }
    }

    /// Whole space plus `{N_u = 0}` and `{N_u ≥ 1}` for every grid time
    /// `0 < u ≤ t`.
    pub fn default_family(grid: &[f64], t: f64) -> Vec<Self> {
        let mut events = vec![Self::everything()];
        for &u in grid.iter().filter(|&&u| u > 0.0 && u <= t) {
            events.push(Self {
                u,
                functional: FunctionalSpec::bin(Variable::Count, None, Some(1.0)),
            });
            events.push(Self {
                u,
                functional: FunctionalSpec::bin(Variable::Count, Some(1.0), None),
            });
        }
        events
    }

    fn label(&self) -> String {
        match self.functional {
            FunctionalSpec::Polynomial { degree: 0, .. } => "Omega".into(),
            _ => format!("{} @ u={}", self.functional.label(), self.u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalWaldEntry {
    pub stratum: usize,
    pub event: String,
    pub u: f64,
    /// Mean of `S_t·1_A`.
    pub lhs: f64,
    /// Mean of `N_t·E[X₁]·1_A`.
    pub rhs: f64,
    /// Mean of the difference.
    pub estimate: f64,
    pub stderr: f64,
    #[serde(with = "super::martingale::zscore")]
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalWaldReport {
    pub t: f64,
    pub claim_mean: f64,
    pub alpha: f64,
    pub family_size: usize,
    pub per_test_alpha: f64,
    pub accept: bool,
    pub strata: Vec<StratumSummary>,
    pub entries: Vec<ConditionalWaldEntry>,
    pub excluded: Vec<Exclusion>,
}

impl ConditionalWaldReport {
    pub fn write_csv<W: Write>(&self, suite: &str, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "suite", "stratum", "event", "u", "t", "lhs", "rhs", "estimate", "stderr", "z",
            "p_value", "reject",
        ])?;
        for e in &self.entries {
            out.write_record([
                suite.to_string(),
                e.stratum.to_string(),
                e.event.clone(),
                e.u.to_string(),
                self.t.to_string(),
                e.lhs.to_string(),
                e.rhs.to_string(),
                e.estimate.to_string(),
                e.stderr.to_string(),
                e.z.to_string(),
                e.p_value.to_string(),
                e.reject.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Within each Θ-stratum and each event `A` observed at `u ≤ t`, tests
/// `E[S_t·1_A] = E[N_t·E[X₁]·1_A]`, Bonferroni-corrected over all
/// (stratum, event) combinations.
pub fn conditional_wald_check(
    paths: &[RiskPath],
    t: f64,
    claim_mean: f64,
    events: &[ConditioningEvent],
    strata: &Strata,
    alpha: f64,
) -> Result<ConditionalWaldReport> {
    check_alpha(alpha)?;
    check_paths(paths, t)?;
    for e in events {
        e.functional.validate()?;
        if e.functional.variable() == Variable::Aggregate
            && !matches!(e.functional, FunctionalSpec::Polynomial { degree: 0, .. })
        {
            return Err(Error::InvalidArgument(
                "conditioning events may only read N_u and theta".into(),
            ));
        }
        if !(e.u >= 0.0 && e.u <= t) {
            return Err(Error::InvalidArgument(format!(
                "event time {} must lie in [0, {t}]",
                e.u
            )));
        }
    }
    let partition = strata.partition(paths.len(), |i| paths[i].theta());
    let summaries = summarize_strata(strata, &partition);
    let mut excluded = Vec::new();
    let mut staged = Vec::new();
    for (index, members) in partition.iter().enumerate() {
        if members.len() < MIN_STRATUM_PATHS {
            excluded.push(Exclusion {
                reason: ExclusionReason::EmptyStratum,
                stratum: Some(index),
                s: None,
                t: Some(t),
                functional: None,
                paths: members.len(),
            });
            continue;
        }
        let group: Vec<&RiskPath> = members.iter().map(|&i| &paths[i]).collect();
        let width = events.len();
        // Per event: [difference, lhs, rhs, indicator].
        let m = accumulate(&group, 4 * width, |p, acc| {
            let n_t = p.count_at(t).expect("t checked") as f64;
            let s_t = p.aggregate_at(t).expect("t checked");
            let rhs = n_t * claim_mean;
            for (k, e) in events.iter().enumerate() {
                let n_u = p.count_at(e.u).expect("u <= t") as f64;
                let a = e.functional.evaluate(n_u, f64::NAN, p.theta());
                acc[4 * k].push((s_t - rhs) * a);
                acc[4 * k + 1].push(s_t * a);
                acc[4 * k + 2].push(rhs * a);
                acc[4 * k + 3].push(a);
            }
        });
        for (k, e) in events.iter().enumerate() {
            if m[4 * k + 3].nonzero == 0 {
                excluded.push(Exclusion {
                    reason: ExclusionReason::DegenerateFunctional,
                    stratum: Some(index),
                    s: Some(e.u),
                    t: Some(t),
                    functional: Some(e.label()),
                    paths: members.len(),
                });
                continue;
            }
            staged.push((
                index,
                e,
                m[4 * k + 1].mean(),
                m[4 * k + 2].mean(),
                m[4 * k].mean(),
                m[4 * k].std_error(),
            ));
        }
    }
    let family_size = staged.len();
    let per_test_alpha = alpha / family_size.max(1) as f64;
    let entries: Vec<ConditionalWaldEntry> = staged
        .into_iter()
        .map(|(stratum, e, lhs, rhs, estimate, stderr)| {
            let (z, p_value) = z_and_p(estimate, stderr);
            ConditionalWaldEntry {
                stratum,
                event: e.label(),
                u: e.u,
                lhs,
                rhs,
                estimate,
                stderr,
                z,
                p_value,
                reject: p_value < per_test_alpha,
            }
        })
        .collect();
    let accept = !entries.iter().any(|e| e.reject);
    Ok(ConditionalWaldReport {
        t,
        claim_mean,
        alpha,
        family_size,
        per_test_alpha,
        accept,
        strata: summaries,
        entries,
        excluded,
    })
}

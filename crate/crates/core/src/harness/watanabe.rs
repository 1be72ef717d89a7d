//! Degenerate-mixing check: a compensated count `N_t − tθ₀` that is a
//! martingale together with Poisson(θ₀t) marginals.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::compensate::{compensate_at_rate, Series};
use super::functional::TestPlan;
use super::martingale::{check_alpha, martingale_test, MartingaleReport};
use crate::distributions::poisson_pmf;
use crate::error::{Error, Result};
use crate::process::{RiskPath, TimeGrid};

/// Pooled bins must expect at least this many observations.
pub const MIN_EXPECTED_PER_BIN: f64 = 5.0;

/// Counts `lo..=hi`, or `lo..` when `hi` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountBin {
    pub lo: u64,
    pub hi: Option<u64>,
    pub expected: f64,
    pub observed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareRecord {
    pub t: f64,
    pub rate: f64,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    pub bins: Vec<CountBin>,
}

/// Expected-count bins for Poisson(`mean`) with `total` observations,
/// pooled left to right until each expects at least
/// [`MIN_EXPECTED_PER_BIN`]; the last bin is open-ended.
pub fn poisson_bins(mean: f64, total: usize) -> Vec<CountBin> {
    let total = total as f64;
    let mut bins: Vec<CountBin> = Vec::new();
    let mut lo = 0u64;
    let mut pending = 0.0;
    let mut covered = 0.0;
    let mut n = 0u64;
    loop {
        let p = poisson_pmf(mean, n);
        pending += p;
        covered += p;
        let remaining = (1.0 - covered).max(0.0) * total;
        if remaining < MIN_EXPECTED_PER_BIN {
            // Close out with an open tail bin holding everything left.
            let expected = (1.0 - (covered - pending)).max(0.0) * total;
            if expected < MIN_EXPECTED_PER_BIN {
                if let Some(last) = bins.last_mut() {
                    last.hi = None;
                    last.expected += expected;
                    break;
                }
            }
            bins.push(CountBin {
                lo,
                hi: None,
                expected,
                observed: 0,
            });
            break;
        }
        if pending * total >= MIN_EXPECTED_PER_BIN {
            bins.push(CountBin {
                lo,
                hi: Some(n),
                expected: pending * total,
                observed: 0,
            });
            pending = 0.0;
            lo = n + 1;
        }
        n += 1;
    }
    bins
}

/// Pearson chi-square of `N_t` on `paths` against Poisson(`rate·t`).
pub fn poisson_chi_square(
    paths: &[RiskPath],
    rate: f64,
    t: f64,
    level: f64,
) -> Result<ChiSquareRecord> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "chi-square time must be > 0, got {t}"
        )));
    }
    let mut bins = poisson_bins(rate * t, paths.len());
    for p in paths {
        let n = p.count_at(t)? as u64;
        let bin = bins
            .iter_mut()
            .find(|b| n >= b.lo && b.hi.is_none_or(|hi| n <= hi))
            .expect("bins cover every count");
        bin.observed += 1;
    }
    let statistic: f64 = bins
        .iter()
        .map(|b| {
            let d = b.observed as f64 - b.expected;
            d * d / b.expected
        })
        .sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sf(statistic)
    };
    Ok(ChiSquareRecord {
        t,
        rate,
        statistic,
        degrees_of_freedom: df,
        p_value,
        level,
        reject: p_value < level,
        bins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatanabeReport {
    pub theta0: f64,
    pub alpha: f64,
    pub accept: bool,
    pub martingale: MartingaleReport,
    pub chi_square: Vec<ChiSquareRecord>,
}

impl WatanabeReport {
    pub fn write_csv<W: Write>(&self, suite: &str, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "suite",
            "t",
            "rate",
            "statistic",
            "df",
            "p_value",
            "level",
            "reject",
        ])?;
        for r in &self.chi_square {
            out.write_record([
                suite.to_string(),
                r.t.to_string(),
                r.rate.to_string(),
                r.statistic.to_string(),
                r.degrees_of_freedom.to_string(),
                r.p_value.to_string(),
                r.level.to_string(),
                r.reject.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs the L-martingale test with Θ ≡ `theta0` and a Poisson chi-square at
/// each of `times`; both must accept. The chi-square family is
/// Bonferroni-corrected across `times`.
pub fn watanabe_check(
    paths: &[RiskPath],
    theta0: f64,
    grid: &TimeGrid,
    plan: &TestPlan,
    times: &[f64],
    alpha: f64,
) -> Result<WatanabeReport> {
    check_alpha(alpha)?;
    if !(theta0.is_finite() && theta0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta0 must be > 0, got {theta0}"
        )));
    }
    let series = paths
        .iter()
        .map(|p| compensate_at_rate(p, grid, 1.0, theta0))
        .collect::<Result<Vec<_>>>()?;
    let martingale = martingale_test(&series, Series::L, plan, alpha)?;
    let level = alpha / times.len().max(1) as f64;
    let chi_square = times
        .iter()
        .map(|&t| poisson_chi_square(paths, theta0, t, level))
        .collect::<Result<Vec<_>>>()?;
    let accept = martingale.accept && chi_square.iter().all(|r| !r.reject);
    Ok(WatanabeReport {
        theta0,
        alpha,
        accept,
        martingale,
        chi_square,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_meet_expected_floor_and_cover_mass() {
        for (mean, total) in [(2.0, 100_000), (0.3, 1000), (15.0, 5000), (1.0, 20)] {
            let bins = poisson_bins(mean, total);
            assert!(bins
                .iter()
                .all(|b| b.expected >= MIN_EXPECTED_PER_BIN - 1e-9));
            let mass: f64 = bins.iter().map(|b| b.expected).sum();
            assert!((mass - total as f64).abs() < 1e-6 * total as f64);
            assert_eq!(bins[0].lo, 0);
            assert!(bins.last().unwrap().hi.is_none());
            for w in bins.windows(2) {
                assert_eq!(w[1].lo, w[0].hi.unwrap() + 1);
            }
        }
    }
}

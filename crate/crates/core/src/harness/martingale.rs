//! Monte Carlo tests of the martingale property for compensated series.
//!
//! For every planned `(s, t, g)` the test estimates `E[(Z_t − Z_s)·g]` by the
//! ensemble mean, turns it into a z-score with the sample standard error,
//! and rejects the family when any two-sided p-value falls below the
//! Bonferroni level `α / K`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::compensate::{CompensatedSeries, Series};
use super::functional::{FunctionalSpec, TestPlan};
use super::summation::{accumulate, Moments};
use crate::error::{Error, Result};
use crate::process::ProcessKind;

/// Smallest ensemble a martingale test accepts.
pub const MIN_ENSEMBLE_PATHS: usize = 1_000;
/// Strata with fewer paths are reported and left out of the family.
pub const MIN_STRATUM_PATHS: usize = 100;
/// Default family-wise level.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Partition of (0, ∞) by the parameter value: `(0, c₁), [c₁, c₂), …, [c_k, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Strata {
    cuts: Vec<f64>,
}

impl Strata {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|c| !(c.is_finite() && *c > 0.0))
            || cuts.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::InvalidArgument(
                "strata cut points must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self { cuts })
    }

    /// A single stratum covering the whole support.
    pub fn whole() -> Self {
        Self { cuts: Vec::new() }
    }

    /// One stratum per atom of a finite discrete law, cut at midpoints.
    pub fn around_atoms(atoms: &[f64]) -> Result<Self> {
        let mut sorted = atoms.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        Self::new(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
    }

    pub fn len(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn index_of(&self, theta: f64) -> usize {
        self.cuts.partition_point(|&c| c <= theta)
    }

    pub fn bounds(&self, index: usize) -> (f64, Option<f64>) {
        let lower = if index == 0 {
            0.0
        } else {
            self.cuts[index - 1]
        };
        (lower, self.cuts.get(index).copied())
    }

    /// Member indices of each stratum, in ensemble order.
    pub fn partition<F: Fn(usize) -> f64>(&self, len: usize, theta: F) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.len()];
        for i in 0..len {
            groups[self.index_of(theta(i))].push(i);
        }
        groups
    }
}

impl TryFrom<Vec<f64>> for Strata {
    type Error = Error;

    fn try_from(cuts: Vec<f64>) -> Result<Self> {
        Self::new(cuts)
    }
}

impl From<Strata> for Vec<f64> {
    fn from(strata: Strata) -> Self {
        strata.cuts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub index: usize,
    pub lower: f64,
    pub upper: Option<f64>,
    pub paths: usize,
    pub included: bool,
}

pub(crate) fn summarize_strata(strata: &Strata, groups: &[Vec<usize>]) -> Vec<StratumSummary> {
    groups
        .iter()
        .enumerate()
        .map(|(index, members)| {
            let (lower, upper) = strata.bounds(index);
            StratumSummary {
                index,
                lower,
                upper,
                paths: members.len(),
                included: members.len() >= MIN_STRATUM_PATHS,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// The functional vanished on every path of the (sub)ensemble.
    DegenerateFunctional,
    /// The stratum held fewer than [`MIN_STRATUM_PATHS`] paths.
    EmptyStratum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub reason: ExclusionReason,
    pub stratum: Option<usize>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub functional: Option<String>,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalResult {
    pub label: String,
    pub functional: FunctionalSpec,
    pub estimate: f64,
    pub stderr: f64,
    /// `"inf"` or `"-inf"` in JSON when the standard error vanishes but the
    /// estimate does not.
    #[serde(with = "zscore")]
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub stratum: Option<usize>,
    pub s: f64,
    pub t: f64,
    pub functionals: Vec<FunctionalResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub paths: usize,
    pub seed: Option<u64>,
    pub kind: Option<ProcessKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub series: Series,
    pub alpha: f64,
    /// Number of `(stratum, pair, functional)` statistics in the family.
    pub family_size: usize,
    /// Bonferroni level each statistic is held to.
    pub per_test_alpha: f64,
    pub accept: bool,
    pub metadata: ReportMetadata,
    pub strata: Vec<StratumSummary>,
    pub pairs: Vec<PairResult>,
    pub excluded: Vec<Exclusion>,
}

impl MartingaleReport {
    pub fn rejections(&self) -> usize {
        self.results().filter(|r| r.reject).count()
    }

    pub fn results(&self) -> impl Iterator<Item = &FunctionalResult> {
        self.pairs.iter().flat_map(|p| p.functionals.iter())
    }

    /// Flat CSV, one row per statistic.
    pub fn write_csv<W: Write>(&self, suite: &str, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "suite",
            "series",
            "stratum",
            "s",
            "t",
            "functional",
            "estimate",
            "stderr",
            "z",
            "p_value",
            "reject",
        ])?;
        let series = format!("{:?}", self.series);
        for pair in &self.pairs {
            let stratum = pair.stratum.map(|s| s.to_string()).unwrap_or_default();
            for r in &pair.functionals {
                out.write_record([
                    suite.to_string(),
                    series.clone(),
                    stratum.clone(),
                    pair.s.to_string(),
                    pair.t.to_string(),
                    r.label.clone(),
                    r.estimate.to_string(),
                    r.stderr.to_string(),
                    r.z.to_string(),
                    r.p_value.to_string(),
                    r.reject.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// z-score and two-sided normal p-value of a mean-zero hypothesis.
/// Serde adapter for z-scores, which may be infinite. JSON has no infinity,
/// so those are written as the strings `"inf"` and `"-inf"`.
pub(crate) mod zscore {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &f64, s: S) -> Result<S::Ok, S::Error> {
        if z.is_finite() {
            s.serialize_f64(*z)
        } else if *z > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(z) => Ok(z),
            Repr::Text(text) => match text.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("invalid z-score `{other}`"))),
            },
        }
    }
}

pub(crate) fn z_and_p(estimate: f64, stderr: f64) -> (f64, f64) {
    let z = if stderr > 0.0 {
        estimate / stderr
    } else if estimate == 0.0 {
        0.0
    } else {
        estimate.signum() * f64::INFINITY
    };
    (z, erfc(z.abs() / std::f64::consts::SQRT_2))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

fn check_ensemble(ensemble: &[CompensatedSeries], plan: &TestPlan) -> Result<()> {
    if ensemble.len() < MIN_ENSEMBLE_PATHS {
        return Err(Error::InsufficientPaths {
            got: ensemble.len(),
            need: MIN_ENSEMBLE_PATHS,
        });
    }
    let grid = ensemble[0].grid();
    if ensemble.iter().any(|c| c.grid() != grid) {
        return Err(Error::GridMismatch(
            "ensemble members use different grids".into(),
        ));
    }
    if plan.pairs().iter().any(|p| p.t >= grid.len()) {
        return Err(Error::GridMismatch("planned pair outside the grid".into()));
    }
    Ok(())
}

fn group_moments(members: &[&CompensatedSeries], series: Series, plan: &TestPlan) -> Vec<Moments> {
    // Slots [0, K) hold the products (Z_t − Z_s)·g, slots [K, 2K) the
    // functional values alone, so a bin that is never hit can be told apart
    // from an increment that happens to vanish.
    let width = plan.width();
    accumulate(members, 2 * width, |c, acc| {
        let values = c.values(series);
        let mut k = 0;
        for pair in plan.pairs() {
            let increment = values[pair.t] - values[pair.s];
            for g in &pair.functionals {
                let weight = g.at(c, pair.s);
                acc[k].push(increment * weight);
                acc[width + k].push(weight);
                k += 1;
            }
        }
    })
}

struct Group {
    stratum: Option<usize>,
    moments: Vec<Moments>,
}

/// `(stratum, s, t, [(functional, estimate, stderr)])` before correction.
type StagedPair = (Option<usize>, f64, f64, Vec<(FunctionalSpec, f64, f64)>);

fn assemble(
    groups: Vec<Group>,
    grid: &[f64],
    plan: &TestPlan,
    alpha: f64,
    mut excluded: Vec<Exclusion>,
) -> (Vec<PairResult>, Vec<Exclusion>, usize, f64) {
    let mut staged: Vec<StagedPair> = Vec::new();
    let width = plan.width();
    for group in &groups {
        let mut k = 0;
        for pair in plan.pairs() {
            let (s, t) = (grid[pair.s], grid[pair.t]);
            let mut kept = Vec::new();
            for g in &pair.functionals {
                let m = &group.moments[k];
                let weights = &group.moments[width + k];
                k += 1;
                if weights.nonzero == 0 {
                    excluded.push(Exclusion {
                        reason: ExclusionReason::DegenerateFunctional,
                        stratum: group.stratum,
                        s: Some(s),
                        t: Some(t),
                        functional: Some(g.label()),
                        paths: m.count as usize,
                    });
                    continue;
                }
                kept.push((g.clone(), m.mean(), m.std_error()));
            }
            staged.push((group.stratum, s, t, kept));
        }
    }
    let family_size: usize = staged.iter().map(|p| p.3.len()).sum();
    let per_test_alpha = alpha / family_size.max(1) as f64;
    let pairs = staged
        .into_iter()
        .map(|(stratum, s, t, kept)| PairResult {
            stratum,
            s,
            t,
            functionals: kept
                .into_iter()
                .map(|(functional, estimate, stderr)| {
                    let (z, p_value) = z_and_p(estimate, stderr);
                    FunctionalResult {
                        label: functional.label(),
                        functional,
                        estimate,
                        stderr,
                        z,
                        p_value,
                        reject: p_value < per_test_alpha,
                    }
                })
                .collect(),
        })
        .collect();
    (pairs, excluded, family_size, per_test_alpha)
}

/// Martingale test of `series` over the whole ensemble.
pub fn martingale_test(
    ensemble: &[CompensatedSeries],
    series: Series,
    plan: &TestPlan,
    alpha: f64,
) -> Result<MartingaleReport> {
    check_alpha(alpha)?;
    check_ensemble(ensemble, plan)?;
    let members: Vec<&CompensatedSeries> = ensemble.iter().collect();
    let moments = group_moments(&members, series, plan);
    let grid = ensemble[0].grid().points();
    let (pairs, excluded, family_size, per_test_alpha) = assemble(
        vec![Group {
            stratum: None,
            moments,
        }],
        grid,
        plan,
        alpha,
        Vec::new(),
    );
    let accept = !pairs.iter().flat_map(|p| &p.functionals).any(|r| r.reject);
    Ok(MartingaleReport {
        series,
        alpha,
        family_size,
        per_test_alpha,
        accept,
        metadata: ReportMetadata {
            paths: ensemble.len(),
            ..Default::default()
        },
        strata: Vec::new(),
        pairs,
        excluded,
    })
}

/// Martingale test run separately inside each Θ-stratum, with one
/// Bonferroni correction across all strata.
pub fn stratified_martingale_test(
    ensemble: &[CompensatedSeries],
    series: Series,
    plan: &TestPlan,
    alpha: f64,
    strata: &Strata,
) -> Result<MartingaleReport> {
    check_alpha(alpha)?;
    check_ensemble(ensemble, plan)?;
    let partition = strata.partition(ensemble.len(), |i| ensemble[i].theta());
    let summaries = summarize_strata(strata, &partition);
    let mut excluded = Vec::new();
    let mut groups = Vec::new();
    for (index, members) in partition.iter().enumerate() {
        if members.len() < MIN_STRATUM_PATHS {
            excluded.push(Exclusion {
                reason: ExclusionReason::EmptyStratum,
                stratum: Some(index),
                s: None,
                t: None,
                functional: None,
                paths: members.len(),
            });
            continue;
        }
        let refs: Vec<&CompensatedSeries> = members.iter().map(|&i| &ensemble[i]).collect();
        groups.push(Group {
            stratum: Some(index),
            moments: group_moments(&refs, series, plan),
        });
    }
    let grid = ensemble[0].grid().points();
    let (pairs, excluded, family_size, per_test_alpha) =
        assemble(groups, grid, plan, alpha, excluded);
    let accept = !pairs.iter().flat_map(|p| &p.functionals).any(|r| r.reject);
    Ok(MartingaleReport {
        series,
        alpha,
        family_size,
        per_test_alpha,
        accept,
        metadata: ReportMetadata {
            paths: ensemble.len(),
            ..Default::default()
        },
        strata: summaries,
        pairs,
        excluded,
    })
}

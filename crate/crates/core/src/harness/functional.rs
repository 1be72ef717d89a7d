//! Time-`s` measurable test functionals and the per-pair plans built from
//! them.
//!
//! A martingale increment `Z_t − Z_s` is orthogonal to every bounded
//! function of the information available at `s`. The harness checks that
//! orthogonality against a finite declared family: indicator bins and
//! low-degree monomials in `N_s`, `S_s` and Θ.

use serde::{Deserialize, Serialize};

use super::compensate::CompensatedSeries;
use crate::error::{Error, Result};

pub const MAX_POLYNOMIAL_DEGREE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// `N_s`
    #[serde(rename = "n_s")]
    Count,
    /// `S_s`
    #[serde(rename = "s_s")]
    Aggregate,
    Theta,
}

impl Variable {
    fn symbol(self) -> &'static str {
        match self {
            Variable::Count => "N_s",
            Variable::Aggregate => "S_s",
            Variable::Theta => "theta",
        }
    }
}

/// A function of the time-`s` information `(N_s, S_s, Θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSpec {
    /// `1[lower <= v < upper]`; a missing bound is unbounded.
    IndicatorBin {
        variable: Variable,
        lower: Option<f64>,
        upper: Option<f64>,
    },
    /// `v^degree`, degree at most 2. Degree 0 is the constant 1.
    Polynomial { variable: Variable, degree: u8 },
}

impl FunctionalSpec {
    pub fn constant() -> Self {
        FunctionalSpec::Polynomial {
            variable: Variable::Theta,
            degree: 0,
        }
    }

    pub fn bin(variable: Variable, lower: Option<f64>, upper: Option<f64>) -> Self {
        FunctionalSpec::IndicatorBin {
            variable,
            lower,
            upper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionalSpec::Polynomial { degree, .. } if *degree > MAX_POLYNOMIAL_DEGREE => {
                Err(Error::InvalidArgument(format!(
                    "polynomial degree {degree} exceeds {MAX_POLYNOMIAL_DEGREE}"
                )))
            }
            FunctionalSpec::IndicatorBin {
                lower: Some(lo),
                upper: Some(hi),
                ..
            } if !(lo < hi) => Err(Error::InvalidArgument(format!(
                "empty indicator bin [{lo}, {hi})"
            ))),
            _ => Ok(()),
        }
    }

    pub fn variable(&self) -> Variable {
        match self {
            FunctionalSpec::IndicatorBin { variable, .. }
            | FunctionalSpec::Polynomial { variable, .. } => *variable,
        }
    }

    pub fn evaluate(&self, count: f64, aggregate: f64, theta: f64) -> f64 {
        let value = |v: Variable| match v {
            Variable::Count => count,
            Variable::Aggregate => aggregate,
            Variable::Theta => theta,
        };
        match self {
            FunctionalSpec::IndicatorBin {
                variable,
                lower,
                upper,
            } => {
                let v = value(*variable);
                let above = lower.is_none_or(|lo| v >= lo);
                let below = upper.is_none_or(|hi| v < hi);
                if above && below {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionalSpec::Polynomial { variable, degree } => match degree {
                0 => 1.0,
                1 => value(*variable),
                d => value(*variable).powi(*d as i32),
            },
        }
    }

    /// Value on `series` at grid index `s`.
    pub fn at(&self, series: &CompensatedSeries, s: usize) -> f64 {
        self.evaluate(series.counts()[s], series.aggregates()[s], series.theta())
    }

    pub fn label(&self) -> String {
        match self {
            FunctionalSpec::IndicatorBin {
                variable,
                lower,
                upper,
            } => {
                let v = variable.symbol();
                match (lower, upper) {
                    (None, None) => format!("1[{v}]"),
                    (Some(lo), None) => format!("1[{v} >= {lo}]"),
                    (None, Some(hi)) => format!("1[{v} < {hi}]"),
                    (Some(lo), Some(hi)) => format!("1[{lo} <= {v} < {hi}]"),
                }
            }
            FunctionalSpec::Polynomial { degree: 0, .. } => "1".into(),
            FunctionalSpec::Polynomial {
                variable,
                degree: 1,
            } => variable.symbol().into(),
            FunctionalSpec::Polynomial { variable, degree } => {
                format!("{}^{degree}", variable.symbol())
            }
        }
    }
}

/// Interior quantile edges of `values`, deduplicated, keeping only edges
/// strictly above the minimum so no bin is empty on the calibration data.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    if values.is_empty() || bins < 2 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let mut edges: Vec<f64> = (1..bins)
        .map(|j| sorted[(j * sorted.len() / bins).min(sorted.len() - 1)])
        .filter(|&e| e > min)
        .collect();
    edges.dedup();
    edges
}

/// Consecutive bins `(-∞, e₁), [e₁, e₂), …, [e_k, ∞)` over `variable`.
pub fn bins_from_edges(variable: Variable, edges: &[f64]) -> Vec<FunctionalSpec> {
    let mut bounds: Vec<Option<f64>> = Vec::with_capacity(edges.len() + 2);
    bounds.push(None);
    bounds.extend(edges.iter().copied().map(Some));
    bounds.push(None);
    bounds
        .windows(2)
        .map(|w| FunctionalSpec::bin(variable, w[0], w[1]))
        .collect()
}

/// Shape of the functional family generated for each `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyOptions {
    /// Quantile bins per variable (edges come from the calibration ensemble).
    pub quantile_bins: usize,
    /// Highest monomial degree in each variable.
    pub polynomial_degree: u8,
    /// Drop every functional that reads Θ (the `F^S`-only experiment).
    pub theta_blind: bool,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            quantile_bins: 4,
            polynomial_degree: 1,
            theta_blind: false,
        }
    }
}

/// Functionals applied to one `(s, t)` pair; `s` and `t` are grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPlan {
    pub s: usize,
    pub t: usize,
    pub functionals: Vec<FunctionalSpec>,
}

/// Every `(s, t, g)` combination a martingale test evaluates.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPlan {
    pairs: Vec<PairPlan>,
}

impl TestPlan {
    pub fn new(pairs: Vec<PairPlan>) -> Result<Self> {
        for p in &pairs {
            if p.s >= p.t {
                return Err(Error::InvalidArgument(format!(
                    "pair ({}, {}) must have s < t",
                    p.s, p.t
                )));
            }
            for f in &p.functionals {
                f.validate()?;
            }
        }
        Ok(Self { pairs })
    }

    /// Same functional list for every pair, pairs given as grid times.
    pub fn uniform(
        grid: &[f64],
        pairs: &[(f64, f64)],
        functionals: &[FunctionalSpec],
    ) -> Result<Self> {
        let index = |x: f64| {
            grid.iter()
                .position(|&g| g == x)
                .ok_or_else(|| Error::GridMismatch(format!("time {x} is not a grid point")))
        };
        let plans = pairs
            .iter()
            .map(|&(s, t)| {
                Ok(PairPlan {
                    s: index(s)?,
                    t: index(t)?,
                    functionals: functionals.to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(plans)
    }

    /// Family built from a held-out calibration ensemble: for each pair, the
    /// constant, quantile bins of `N_s`, `S_s`, Θ, and monomials up to the
    /// configured degree.
    pub fn calibrated(
        calibration: &[CompensatedSeries],
        pairs: &[(usize, usize)],
        options: &FamilyOptions,
    ) -> Result<Self> {
        if options.polynomial_degree > MAX_POLYNOMIAL_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {} exceeds {MAX_POLYNOMIAL_DEGREE}",
                options.polynomial_degree
            )));
        }
        if calibration.is_empty() {
            return Err(Error::InsufficientPaths { got: 0, need: 1 });
        }
        let mut variables = vec![Variable::Count, Variable::Aggregate];
        if !options.theta_blind {
            variables.push(Variable::Theta);
        }
        let plans = pairs
            .iter()
            .map(|&(s, t)| {
                let mut functionals = vec![FunctionalSpec::constant()];
                for &v in &variables {
                    let values: Vec<f64> = calibration
                        .iter()
                        .map(|c| {
                            FunctionalSpec::Polynomial {
                                variable: v,
                                degree: 1,
                            }
                            .at(c, s)
                        })
                        .collect();
                    let edges = quantile_edges(&values, options.quantile_bins);
                    if !edges.is_empty() {
                        functionals.extend(bins_from_edges(v, &edges));
                    }
                }
                for &v in &variables {
                    for degree in 1..=options.polynomial_degree {
                        functionals.push(FunctionalSpec::Polynomial {
                            variable: v,
                            degree,
                        });
                    }
                }
                PairPlan { s, t, functionals }
            })
            .collect();
        Self::new(plans)
    }

    pub fn pairs(&self) -> &[PairPlan] {
        &self.pairs
    }

    /// Total number of `(pair, functional)` combinations.
    pub fn width(&self) -> usize {
        self.pairs.iter().map(|p| p.functionals.len()).sum()
    }
}

/// All grid-index pairs `s < t`.
pub fn all_pairs(grid_len: usize) -> Vec<(usize, usize)> {
    (0..grid_len)
        .flat_map(|s| (s + 1..grid_len).map(move |t| (s, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_bins_and_polynomials() {
        let bin = FunctionalSpec::bin(Variable::Count, Some(1.0), Some(3.0));
        assert_eq!(bin.evaluate(1.0, 0.0, 0.0), 1.0);
        assert_eq!(bin.evaluate(3.0, 0.0, 0.0), 0.0);
        assert_eq!(bin.evaluate(0.0, 0.0, 0.0), 0.0);
        let open = FunctionalSpec::bin(Variable::Theta, None, None);
        assert_eq!(open.evaluate(0.0, 0.0, 7.0), 1.0);
        let sq = FunctionalSpec::Polynomial {
            variable: Variable::Aggregate,
            degree: 2,
        };
        assert_eq!(sq.evaluate(0.0, 3.0, 0.0), 9.0);
        assert_eq!(FunctionalSpec::constant().evaluate(5.0, 5.0, 5.0), 1.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let cubic = FunctionalSpec::Polynomial {
            variable: Variable::Count,
            degree: 3,
        };
        assert!(cubic.validate().is_err());
        assert!(FunctionalSpec::bin(Variable::Count, Some(2.0), Some(2.0))
            .validate()
            .is_err());
        assert!(TestPlan::new(vec![PairPlan {
            s: 1,
            t: 1,
            functionals: vec![]
        }])
        .is_err());
    }

    #[test]
    fn quantile_edges_handle_ties() {
        let values = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 5.0];
        assert_eq!(quantile_edges(&values, 4), vec![1.0]);
        assert!(quantile_edges(&[3.0; 10], 4).is_empty());
        let spread: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(quantile_edges(&spread, 4), vec![25.0, 50.0, 75.0]);
    }

    #[test]
    fn bins_partition_the_line() {
        let bins = bins_from_edges(Variable::Count, &[1.0, 3.0]);
        assert_eq!(bins.len(), 3);
        for v in [-1.0, 0.0, 1.0, 2.5, 3.0, 100.0] {
            let hits: f64 = bins.iter().map(|b| b.evaluate(v, 0.0, 0.0)).sum();
            assert_eq!(hits, 1.0);
        }
    }

    #[test]
    fn labels() {
        assert_eq!(FunctionalSpec::constant().label(), "1");
        assert_eq!(
            FunctionalSpec::bin(Variable::Count, Some(1.0), None).label(),
            "1[N_s >= 1]"
        );
        assert_eq!(
            FunctionalSpec::Polynomial {
                variable: Variable::Theta,
                degree: 2
            }
            .label(),
            "theta^2"
        );
    }

    #[test]
    fn pairs_enumeration() {
        assert_eq!(all_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(all_pairs(1).is_empty());
    }

    #[test]
    fn spec_json_shape() {
        let f = FunctionalSpec::bin(Variable::Count, Some(1.0), None);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"indicator_bin","variable":"n_s","lower":1.0,"upper":null}"#
        );
        let back: FunctionalSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }
}

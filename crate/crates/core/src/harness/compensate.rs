use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{RiskPath, TimeGrid};

/// Which compensated process a test runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Series {
    /// `M_t = S_t − tΘE[X₁]`
    M,
    /// `L_t = N_t − tΘ`
    L,
}

/// Compensated aggregate and counting processes of one path on a grid,
/// together with the time-`s` information functionals may read.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedSeries {
    grid: TimeGrid,
    m_values: Vec<f64>,
    l_values: Vec<f64>,
    counts: Vec<f64>,
    aggregates: Vec<f64>,
    theta: f64,
}

impl CompensatedSeries {
    /// Assembles a series from raw values. `counts` and `aggregates` are
    /// `N` and `S` on the grid.
    pub fn new(
        grid: TimeGrid,
        m_values: Vec<f64>,
        l_values: Vec<f64>,
        counts: Vec<f64>,
        aggregates: Vec<f64>,
        theta: f64,
    ) -> Result<Self> {
        let n = grid.len();
        if [
            m_values.len(),
            l_values.len(),
            counts.len(),
            aggregates.len(),
        ]
        .iter()
        .any(|&len| len != n)
        {
            return Err(Error::GridMismatch(
                "series length differs from grid".into(),
            ));
        }
        if m_values[0] != 0.0 || l_values[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "compensated series must start at 0".into(),
            ));
        }
        Ok(Self {
            grid,
            m_values,
            l_values,
            counts,
            aggregates,
            theta,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn m_values(&self) -> &[f64] {
        &self.m_values
    }

    pub fn l_values(&self) -> &[f64] {
        &self.l_values
    }

    pub fn values(&self, series: Series) -> &[f64] {
        match series {
            Series::M => &self.m_values,
            Series::L => &self.l_values,
        }
    }

    /// `N` at each grid point.
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// `S` at each grid point.
    pub fn aggregates(&self) -> &[f64] {
        &self.aggregates
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Compensates `path` with its own realized Θ.
pub fn compensate(path: &RiskPath, grid: &TimeGrid, claim_mean: f64) -> Result<CompensatedSeries> {
    compensate_at_rate(path, grid, claim_mean, path.theta())
}

/// Compensates `path` with an externally supplied rate instead of the path's
/// own Θ.
pub fn compensate_at_rate(
    path: &RiskPath,
    grid: &TimeGrid,
    claim_mean: f64,
    theta: f64,
) -> Result<CompensatedSeries> {
    if !(claim_mean.is_finite() && claim_mean > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "claim mean must be > 0, got {claim_mean}"
        )));
    }
    grid.check_within(path.horizon())?;
    let n = grid.len();
    let mut m_values = Vec::with_capacity(n);
    let mut l_values = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut aggregates = Vec::with_capacity(n);
    for &t in grid.points() {
        let count = path.count_at(t)? as f64;
        let aggregate = path.aggregate_at(t)?;
        // Same drift expression for both series, so unit claims give
        // bitwise-identical M and L.
        let drift = t * theta;
        m_values.push(aggregate - drift * claim_mean);
        l_values.push(count - drift);
        counts.push(count);
        aggregates.push(aggregate);
    }
    Ok(CompensatedSeries {
        grid: grid.clone(),
        m_values,
        l_values,
        counts,
        aggregates,
        theta,
    })
}

pub fn compensate_ensemble(
    paths: &[RiskPath],
    grid: &TimeGrid,
    claim_mean: f64,
) -> Result<Vec<CompensatedSeries>> {
    paths
        .par_iter()
        .map(|p| compensate(p, grid, claim_mean))
        .collect()
}

//! Event-driven simulation of risk-process trajectories and evaluation of the
//! counting process `N_t` and the aggregate process `S_t` along them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{ClaimLaw, MixingLaw};
use crate::error::{Error, Result};
use crate::rng::{Domain, PathStreams, StreamFactory};

/// Default hard cap on arrivals per path.
pub const DEFAULT_MAX_EVENTS: usize = 10_000_000;

/// Redraws tolerated when an interarrival time is too small to advance the
/// clock in floating point.
const MAX_STALLED_DRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Cpp,
    Cmpp,
    Renewal,
}

/// One realized trajectory on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskPath {
    theta: f64,
    arrivals: Vec<f64>,
    claims: Vec<f64>,
    horizon: f64,
    kind: ProcessKind,
}

impl RiskPath {
    /// Builds a path from raw data, checking every path invariant.
    pub fn new(
        theta: f64,
        arrivals: Vec<f64>,
        claims: Vec<f64>,
        horizon: f64,
        kind: ProcessKind,
    ) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "theta must be > 0, got {theta}"
            )));
        }
        check_horizon(horizon)?;
        if arrivals.len() != claims.len() {
            return Err(Error::InvalidArgument(format!(
                "{} arrivals but {} claims",
                arrivals.len(),
                claims.len()
            )));
        }
        let mut prev = 0.0;
        for &a in &arrivals {
            if !(a > prev && a <= horizon) {
                return Err(Error::InvalidArgument(format!(
                    "arrivals must be strictly increasing in (0, {horizon}]"
                )));
            }
            prev = a;
        }
        if claims.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidArgument("claims must be > 0".into()));
        }
        Ok(Self {
            theta,
            arrivals,
            claims,
            horizon,
            kind,
        })
    }

    /// Realized Θ(ω), or the nominal rate `1/E[W₁]` for renewal paths.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn claims(&self) -> &[f64] {
        &self.claims
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::OutOfHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `N_t`: arrivals in `[0, t]`. Right-continuous, so an arrival at exactly
    /// `t` is counted.
    pub fn count_at(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        Ok(self.arrivals.partition_point(|&a| a <= t))
    }

    /// `S_t`: total claims of the arrivals in `[0, t]`.
    pub fn aggregate_at(&self, t: f64) -> Result<f64> {
        let n = self.count_at(t)?;
        // Fold from +0.0: `Sum` for floats starts at -0.0.
        Ok(self.claims[..n].iter().fold(0.0, |acc, x| acc + x))
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    Ok(())
}

/// Strictly increasing evaluation times starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.first() != Some(&0.0) {
            return Err(Error::GridMismatch("grid must start at 0".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::GridMismatch(
                "grid points must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.points.last().expect("grid is never empty")
    }

    /// Index of `t` on the grid, if it is a grid point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| p == t)
    }

    pub fn check_within(&self, horizon: f64) -> Result<()> {
        if self.last() > horizon {
            return Err(Error::GridMismatch(format!(
                "grid point {} exceeds horizon {horizon}",
                self.last()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(grid: TimeGrid) -> Self {
        grid.points
    }
}

fn arrivals_until<F>(mut next_gap: F, horizon: f64, max_events: usize) -> Result<Vec<f64>>
where
    F: FnMut() -> f64,
{
    let mut arrivals = Vec::new();
    let mut clock = 0.0;
    let mut stalled = 0;
    loop {
        let next = clock + next_gap();
        if next > horizon {
            break;
        }
        if next <= clock {
            stalled += 1;
            if stalled > MAX_STALLED_DRAWS {
                return Err(Error::InvalidArgument(
                    "interarrival times too small to advance the clock".into(),
                ));
            }
            continue;
        }
        stalled = 0;
        if arrivals.len() == max_events {
            return Err(Error::EventCapExceeded {
                cap: max_events,
                horizon,
            });
        }
        arrivals.push(next);
        clock = next;
    }
    Ok(arrivals)
}

fn exponential_gaps(theta: f64, streams: &mut PathStreams) -> impl FnMut() -> f64 + '_ {
    // Inverse-CDF on (0, 1]; never returns an infinite gap.
    move || {
        let u: f64 = 1.0 - rand::Rng::random::<f64>(&mut streams.interarrival);
        -u.ln() / theta
    }
}

/// Compound Poisson path with rate `theta`.
///
/// Interarrivals come from the interarrival substream, claim sizes from the
/// claims substream; the mixing substream is left untouched.
pub fn simulate_cpp_path(
    theta: f64,
    claims: &ClaimLaw,
    horizon: f64,
    streams: &mut PathStreams,
    max_events: usize,
) -> Result<RiskPath> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must be > 0, got {theta}"
        )));
    }
    check_horizon(horizon)?;
    let arrivals = arrivals_until(exponential_gaps(theta, streams), horizon, max_events)?;
    let sizes = arrivals
        .iter()
        .map(|_| claims.sample(&mut streams.claims))
        .collect();
    Ok(RiskPath {
        theta,
        arrivals,
        claims: sizes,
        horizon,
        kind: ProcessKind::Cpp,
    })
}

/// Compound mixed Poisson path: Θ from the mixing substream, then a compound
/// Poisson path at rate Θ from the remaining substreams.
pub fn simulate_cmpp_path(
    mixing: &MixingLaw,
    claims: &ClaimLaw,
    horizon: f64,
    streams: &mut PathStreams,
    max_events: usize,
) -> Result<RiskPath> {
    let theta = mixing.sample(&mut streams.mixing);
    let mut path = simulate_cpp_path(theta, claims, horizon, streams, max_events)?;
    path.kind = ProcessKind::Cmpp;
    Ok(path)
}

/// Compound renewal path with i.i.d. interarrivals from `interarrival` and
/// independent claim sizes.
pub fn simulate_renewal_path(
    interarrival: &ClaimLaw,
    claims: &ClaimLaw,
    horizon: f64,
    streams: &mut PathStreams,
    max_events: usize,
) -> Result<RiskPath> {
    check_horizon(horizon)?;
    let arrivals = arrivals_until(
        || interarrival.sample(&mut streams.interarrival),
        horizon,
        max_events,
    )?;
    let sizes = arrivals
        .iter()
        .map(|_| claims.sample(&mut streams.claims))
        .collect();
    Ok(RiskPath {
        theta: 1.0 / interarrival.mean(),
        arrivals,
        claims: sizes,
        horizon,
        kind: ProcessKind::Renewal,
    })
}

/// Renewal path whose claim sizes are its own interarrival times, so sizes
/// and the counting process are dependent.
pub fn simulate_coupled_renewal_path(
    interarrival: &ClaimLaw,
    horizon: f64,
    streams: &mut PathStreams,
    max_events: usize,
) -> Result<RiskPath> {
    check_horizon(horizon)?;
    let arrivals = arrivals_until(
        || interarrival.sample(&mut streams.interarrival),
        horizon,
        max_events,
    )?;
    let mut prev = 0.0;
    let sizes = arrivals
        .iter()
        .map(|&a| {
            let w = a - prev;
            prev = a;
            w
        })
        .collect();
    Ok(RiskPath {
        theta: 1.0 / interarrival.mean(),
        arrivals,
        claims: sizes,
        horizon,
        kind: ProcessKind::Renewal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Count,
    Aggregate,
}

/// Successive differences of `N` or `S` along `grid`.
pub fn increments(path: &RiskPath, grid: &TimeGrid, which: Observable) -> Result<Vec<f64>> {
    grid.check_within(path.horizon())?;
    let values = grid
        .points()
        .iter()
        .map(|&t| match which {
            Observable::Count => path.count_at(t).map(|n| n as f64),
            Observable::Aggregate => path.aggregate_at(t),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// A fully specified generating mechanism for an ensemble of paths.
#[derive(Debug, Clone)]
pub enum ProcessModel {
    Cpp {
        theta: f64,
        claims: ClaimLaw,
    },
    Cmpp {
        mixing: MixingLaw,
        claims: ClaimLaw,
    },
    Renewal {
        interarrival: ClaimLaw,
        claims: ClaimLaw,
    },
    /// Renewal with claim sizes equal to the interarrival times.
    CoupledRenewal {
        interarrival: ClaimLaw,
    },
}

impl ProcessModel {
    pub fn kind(&self) -> ProcessKind {
        match self {
            ProcessModel::Cpp { .. } => ProcessKind::Cpp,
            ProcessModel::Cmpp { .. } => ProcessKind::Cmpp,
            ProcessModel::Renewal { .. } | ProcessModel::CoupledRenewal { .. } => {
                ProcessKind::Renewal
            }
        }
    }

    /// E[X₁] of the generating claim law.
    pub fn claim_mean(&self) -> f64 {
        match self {
            ProcessModel::Cpp { claims, .. }
            | ProcessModel::Cmpp { claims, .. }
            | ProcessModel::Renewal { claims, .. } => claims.mean(),
            ProcessModel::CoupledRenewal { interarrival } => interarrival.mean(),
        }
    }

    pub fn simulate(
        &self,
        horizon: f64,
        streams: &mut PathStreams,
        max_events: usize,
    ) -> Result<RiskPath> {
        match self {
            ProcessModel::Cpp { theta, claims } => {
                simulate_cpp_path(*theta, claims, horizon, streams, max_events)
            }
            ProcessModel::Cmpp { mixing, claims } => {
                simulate_cmpp_path(mixing, claims, horizon, streams, max_events)
            }
            ProcessModel::Renewal {
                interarrival,
                claims,
            } => simulate_renewal_path(interarrival, claims, horizon, streams, max_events),
            ProcessModel::CoupledRenewal { interarrival } => {
                simulate_coupled_renewal_path(interarrival, horizon, streams, max_events)
            }
        }
    }

    /// Paths `0..n_paths` of `domain`, simulated in parallel. Path `i` depends
    /// only on `(master_seed, domain, i)`.
    pub fn simulate_ensemble(
        &self,
        horizon: f64,
        n_paths: usize,
        master_seed: u64,
        domain: Domain,
        max_events: usize,
    ) -> Result<Vec<RiskPath>> {
        let factory = StreamFactory::new(master_seed);
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut streams = factory.path_streams(domain, i);
                self.simulate(horizon, &mut streams, max_events)
            })
            .collect()
    }
}

/// Writes one CSV row per event: `path_id,theta,arrival,claim`. Paths with no
/// events get a single row with empty `arrival` and `claim` so their θ stays
/// visible.
pub fn write_paths_csv<W: Write>(paths: &[RiskPath], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["path_id", "theta", "arrival", "claim"])?;
    for (id, path) in paths.iter().enumerate() {
        let id = id.to_string();
        let theta = path.theta().to_string();
        if path.is_empty() {
            out.write_record([id.as_str(), theta.as_str(), "", ""])?;
        }
        for (a, c) in path.arrivals().iter().zip(path.claims()) {
            out.write_record([id.clone(), theta.clone(), a.to_string(), c.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

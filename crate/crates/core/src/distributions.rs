//! Mixing laws for the structural parameter, claim-size laws, and the
//! closed-form mixed Poisson pmf.
//!
//! Laws come in two layers. [`MixingSpec`] / [`ClaimSpec`] are the plain
//! serde records found in experiment configs and may hold anything;
//! [`MixingLaw`] / [`ClaimLaw`] are built from them only after every
//! invariant holds (positive support, finite mean, weights summing to one),
//! and carry a ready-to-use sampler.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Tolerance on `Σ weights == 1` for finite discrete laws.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Config-level description of the law of the structural parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixingSpec {
    Degenerate { value: f64 },
    Gamma { shape: f64, rate: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

/// Config-level description of a positive claim-size (or interarrival) law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClaimSpec {
    Degenerate { value: f64 },
    Exponential { rate: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Discrete { atoms: Vec<f64>, weights: Vec<f64> },
}

fn positive(prefix: &str, field: &str, value: f64, out: &mut Vec<String>) {
    if !(value.is_finite() && value > 0.0) {
        out.push(format!("{prefix}.{field} must be > 0"));
    }
}

fn discrete_violations(prefix: &str, atoms: &[f64], weights: &[f64], out: &mut Vec<String>) {
    if atoms.is_empty() {
        out.push(format!("{prefix}.atoms must not be empty"));
    }
    if atoms.len() != weights.len() {
        out.push(format!(
            "{prefix}.weights must have the same length as {prefix}.atoms"
        ));
    }
    if atoms.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        out.push(format!("{prefix}.atoms must all be > 0"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        out.push(format!("{prefix}.weights must all be >= 0"));
    } else {
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            out.push(format!("{prefix}.weights must sum to 1 (got {total})"));
        }
    }
}

impl MixingSpec {
    /// Every violated invariant, with field paths rooted at `prefix`.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            MixingSpec::Degenerate { value } => positive(prefix, "value", *value, &mut out),
            MixingSpec::Gamma { shape, rate } => {
                positive(prefix, "shape", *shape, &mut out);
                positive(prefix, "rate", *rate, &mut out);
            }
            MixingSpec::Discrete { atoms, weights } => {
                discrete_violations(prefix, atoms, weights, &mut out)
            }
        }
        out
    }
}

impl ClaimSpec {
    /// Every violated invariant, with field paths rooted at `prefix`.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ClaimSpec::Degenerate { value } => positive(prefix, "value", *value, &mut out),
            ClaimSpec::Exponential { rate } => positive(prefix, "rate", *rate, &mut out),
            ClaimSpec::Lognormal { mu, sigma } => {
                if !mu.is_finite() {
                    out.push(format!("{prefix}.mu must be finite"));
                }
                positive(prefix, "sigma", *sigma, &mut out);
                if mu.is_finite() && sigma.is_finite() {
                    let mean = (mu + 0.5 * sigma * sigma).exp();
                    if !mean.is_finite() {
                        out.push(format!("{prefix} must have a finite mean"));
                    }
                }
            }
            ClaimSpec::Discrete { atoms, weights } => {
                discrete_violations(prefix, atoms, weights, &mut out)
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct DiscreteSampler {
    atoms: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl DiscreteSampler {
    fn new(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        let index = WeightedIndex::new(weights.iter().copied())
            .map_err(|e| Error::InvalidLaw(format!("discrete weights: {e}")))?;
        Ok(Self {
            atoms: atoms.to_vec(),
            index,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.atoms[self.index.sample(rng)]
    }
}

#[derive(Debug, Clone)]
enum MixingSampler {
    Point(f64),
    Gamma(Gamma<f64>),
    Discrete(DiscreteSampler),
}

/// Validated law of the structural parameter Θ, supported on (0, ∞).
#[derive(Debug, Clone)]
pub struct MixingLaw {
    spec: MixingSpec,
    sampler: MixingSampler,
}

impl MixingLaw {
    pub fn new(spec: MixingSpec) -> Result<Self> {
        let violations = spec.violations("mixing");
        if !violations.is_empty() {
            return Err(Error::InvalidLaw(violations.join("; ")));
        }
        let sampler = match &spec {
            MixingSpec::Degenerate { value } => MixingSampler::Point(*value),
            MixingSpec::Gamma { shape, rate } => MixingSampler::Gamma(
                Gamma::new(*shape, 1.0 / rate).map_err(|e| Error::InvalidLaw(e.to_string()))?,
            ),
            MixingSpec::Discrete { atoms, weights } => {
                MixingSampler::Discrete(DiscreteSampler::new(atoms, weights)?)
            }
        };
        Ok(Self { spec, sampler })
    }

    pub fn degenerate(value: f64) -> Result<Self> {
        Self::new(MixingSpec::Degenerate { value })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::new(MixingSpec::Gamma { shape, rate })
    }

    pub fn discrete(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(MixingSpec::Discrete { atoms, weights })
    }

    pub fn spec(&self) -> &MixingSpec {
        &self.spec
    }

    /// The point mass, if the law is degenerate.
    pub fn point(&self) -> Option<f64> {
        match self.spec {
            MixingSpec::Degenerate { value } => Some(value),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.spec {
            MixingSpec::Degenerate { value } => *value,
            MixingSpec::Gamma { shape, rate } => shape / rate,
            MixingSpec::Discrete { atoms, weights } => {
                atoms.iter().zip(weights).map(|(a, w)| a * w).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.spec {
            MixingSpec::Degenerate { .. } => 0.0,
            MixingSpec::Gamma { shape, rate } => shape / (rate * rate),
            MixingSpec::Discrete { atoms, weights } => {
                let m = self.mean();
                atoms
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| w * (a - m) * (a - m))
                    .sum()
            }
        }
    }

    /// One draw of Θ; always strictly positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            MixingSampler::Point(v) => *v,
            MixingSampler::Gamma(g) => loop {
                // Gamma draws with small shape can underflow to zero.
                let x = g.sample(rng);
                if x > 0.0 {
                    break x;
                }
            },
            MixingSampler::Discrete(d) => d.sample(rng),
        }
    }
}

#[derive(Debug, Clone)]
enum ClaimSampler {
    Point(f64),
    Exponential(Exp<f64>),
    LogNormal(LogNormal<f64>),
    Discrete(DiscreteSampler),
}

/// Validated law of a strictly positive, integrable random variable.
///
/// Used both for claim sizes and for renewal interarrival times.
#[derive(Debug, Clone)]
pub struct ClaimLaw {
    spec: ClaimSpec,
    sampler: ClaimSampler,
}

impl ClaimLaw {
    pub fn new(spec: ClaimSpec) -> Result<Self> {
        let violations = spec.violations("claims");
        if !violations.is_empty() {
            return Err(Error::InvalidLaw(violations.join("; ")));
        }
        let sampler = match &spec {
            ClaimSpec::Degenerate { value } => ClaimSampler::Point(*value),
            ClaimSpec::Exponential { rate } => ClaimSampler::Exponential(
                Exp::new(*rate).map_err(|e| Error::InvalidLaw(e.to_string()))?,
            ),
            ClaimSpec::Lognormal { mu, sigma } => ClaimSampler::LogNormal(
                LogNormal::new(*mu, *sigma).map_err(|e| Error::InvalidLaw(e.to_string()))?,
            ),
            ClaimSpec::Discrete { atoms, weights } => {
                ClaimSampler::Discrete(DiscreteSampler::new(atoms, weights)?)
            }
        };
        Ok(Self { spec, sampler })
    }

    pub fn degenerate(value: f64) -> Result<Self> {
        Self::new(ClaimSpec::Degenerate { value })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(ClaimSpec::Exponential { rate })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(ClaimSpec::Lognormal { mu, sigma })
    }

    pub fn discrete(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::new(ClaimSpec::Discrete { atoms, weights })
    }

    pub fn spec(&self) -> &ClaimSpec {
        &self.spec
    }

    pub fn mean(&self) -> f64 {
        match &self.spec {
            ClaimSpec::Degenerate { value } => *value,
            ClaimSpec::Exponential { rate } => 1.0 / rate,
            ClaimSpec::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            ClaimSpec::Discrete { atoms, weights } => {
                atoms.iter().zip(weights).map(|(a, w)| a * w).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.spec {
            ClaimSpec::Degenerate { .. } => 0.0,
            ClaimSpec::Exponential { rate } => 1.0 / (rate * rate),
            ClaimSpec::Lognormal { mu, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * mu + s2).exp()
            }
            ClaimSpec::Discrete { atoms, weights } => {
                let m = self.mean();
                atoms
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| w * (a - m) * (a - m))
                    .sum()
            }
        }
    }

    /// Every supported family has a finite second moment; the check exists so
    /// the config validator states the requirement in one place.
    pub fn has_finite_variance(&self) -> bool {
        self.variance().is_finite()
    }

    /// One draw; always strictly positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            ClaimSampler::Point(v) => *v,
            ClaimSampler::Exponential(d) => loop {
                let x = d.sample(rng);
                if x > 0.0 {
                    break x;
                }
            },
            ClaimSampler::LogNormal(d) => loop {
                let x = d.sample(rng);
                if x > 0.0 {
                    break x;
                }
            },
            ClaimSampler::Discrete(d) => d.sample(rng),
        }
    }
}

/// E[Θ].
pub fn mixing_mean(law: &MixingLaw) -> f64 {
    law.mean()
}

/// E[X₁].
pub fn claim_mean(law: &ClaimLaw) -> f64 {
    law.mean()
}

pub fn sample_mixing<R: Rng + ?Sized>(law: &MixingLaw, stream: &mut R) -> f64 {
    law.sample(stream)
}

pub fn sample_claim<R: Rng + ?Sized>(law: &ClaimLaw, stream: &mut R) -> f64 {
    law.sample(stream)
}

fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Poisson(λ) probability of `n`, evaluated in log space.
pub fn poisson_pmf(lambda: f64, n: u64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * lambda.ln() - lambda - ln_factorial(n)).exp()
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

/// P(N_t = n) for the mixed Poisson count with mixing law `law`.
///
/// Gamma mixing uses the negative binomial closed form
/// `C(n+α−1, n) (β/(β+t))^α (t/(β+t))^n`, assembled from log-gamma terms so
/// large `n` neither overflows nor loses the small tail probabilities.
pub fn mixed_poisson_pmf(law: &MixingLaw, t: f64, n: u64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let p = match law.spec() {
        MixingSpec::Degenerate { value } => poisson_pmf(t * value, n),
        MixingSpec::Gamma { shape, rate } => {
            let nf = n as f64;
            let log_binom = ln_gamma(nf + shape) - ln_gamma(*shape) - ln_factorial(n);
            // α ln(β/(β+t)) = −α ln(1 + t/β)
            let log_zero_mass = -shape * (t / rate).ln_1p();
            let log_ratio = if n == 0 {
                0.0
            } else {
                nf * (t.ln() - (rate + t).ln())
            };
            (log_binom + log_zero_mass + log_ratio).exp()
        }
        MixingSpec::Discrete { atoms, weights } => atoms
            .iter()
            .zip(weights)
            .map(|(a, w)| w * poisson_pmf(t * a, n))
            .sum(),
    };
    Ok(p)
}

/// `[P(N_t = 0), …, P(N_t = n_max)]` together with the unaccounted tail mass
/// `max(0, 1 − Σ)`.
pub fn mixed_poisson_table(law: &MixingLaw, t: f64, n_max: u64) -> Result<(Vec<f64>, f64)> {
    let probs = (0..=n_max)
        .map(|n| mixed_poisson_pmf(law, t, n))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = probs.iter().sum();
    Ok((probs, (1.0 - total).max(0.0)))
}

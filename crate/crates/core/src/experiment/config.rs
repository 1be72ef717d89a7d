//! Experiment configuration documents.
//!
//! A config is a JSON object carrying `"schema_version": 1`. See
//! `docs/config.md` in the repository for the full field reference.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::distributions::{ClaimLaw, ClaimSpec, MixingLaw, MixingSpec};
use crate::error::{Error, Result};
use crate::harness::{FamilyOptions, Strata, DEFAULT_ALPHA, MIN_ENSEMBLE_PATHS, MIN_STRATUM_PATHS};
use crate::process::{ProcessKind, ProcessModel, TimeGrid, DEFAULT_MAX_EVENTS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    MartingaleM,
    MartingaleL,
    Stratified,
    Wald,
    ConditionalWald,
    Watanabe,
    PmfCheck,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::MartingaleM,
        Suite::MartingaleL,
        Suite::Stratified,
        Suite::Wald,
        Suite::ConditionalWald,
        Suite::Watanabe,
        Suite::PmfCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::MartingaleM => "martingale_m",
            Suite::MartingaleL => "martingale_l",
            Suite::Stratified => "stratified",
            Suite::Wald => "wald",
            Suite::ConditionalWald => "conditional_wald",
            Suite::Watanabe => "watanabe",
            Suite::PmfCheck => "pmf_check",
        }
    }

    /// Suites that consume the calibrated functional family.
    pub fn uses_functionals(self) -> bool {
        matches!(
            self,
            Suite::MartingaleM | Suite::MartingaleL | Suite::Stratified | Suite::Watanabe
        )
    }
}

/// How renewal claim sizes relate to the interarrival times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenewalClaims {
    /// i.i.d. from `claims`, independent of the arrivals.
    #[default]
    Independent,
    /// Each claim equals the preceding interarrival time.
    Interarrival,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    /// Also write `paths.csv` with one row per simulated event.
    pub dump_paths: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: "cmpplab-out".into(),
            dump_paths: false,
        }
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_calibration_paths() -> usize {
    10_000
}

fn default_pmf_n_max() -> u64 {
    3
}

fn default_max_events() -> usize {
    DEFAULT_MAX_EVENTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ProcessKind,
    /// Law of Θ. Required for `cmpp`; must be degenerate for `cpp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingSpec>,
    /// Claim-size law. Required unless renewal claims copy the interarrivals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claims: Option<ClaimSpec>,
    /// Interarrival law; `renewal` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interarrival: Option<ClaimSpec>,
    #[serde(default)]
    pub renewal_claims: RenewalClaims,
    pub horizon: f64,
    pub grid: Vec<f64>,
    pub n_paths: usize,
    /// Held-out paths used only to place quantile bin edges.
    #[serde(default = "default_calibration_paths")]
    pub calibration_paths: usize,
    pub master_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub suites: Vec<Suite>,
    /// Interior cut points of the Θ strata. Defaults to midpoints between
    /// atoms for discrete mixing and a single stratum otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<f64>>,
    #[serde(default)]
    pub functionals: FamilyOptions,
    /// `(s, t)` pairs as grid times. Defaults to every pair `s < t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(f64, f64)>>,
    /// Defaults to every grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wald_times: Option<Vec<f64>>,
    /// Defaults to the last grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional_wald_time: Option<f64>,
    /// Defaults to every positive grid point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub watanabe_times: Option<Vec<f64>>,
    #[serde(default = "default_pmf_n_max")]
    pub pmf_n_max: u64,
    #[serde(default = "default_max_events")]
    pub max_events: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses `text`, applies `key=value` overrides (dotted keys reach into
    /// nested objects), then deserializes.
    pub fn from_json_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 over the canonical JSON of every semantic field. Formatting,
    /// key order and the `output` section do not contribute.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut value {
            map.remove("output");
        }
        // serde_json's default map is ordered, so this text is canonical.
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Suites in config order with duplicates removed.
    pub fn suite_list(&self) -> Vec<Suite> {
        let mut seen = Vec::new();
        for &s in &self.suites {
            if !seen.contains(&s) {
                seen.push(s);
            }
        }
        seen
    }
}

/// Sets `key` (dotted path) in `value` to `raw`, parsed as JSON when it
/// parses, as a string otherwise.
pub fn apply_override(value: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let mut cursor = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "malformed override key `{key}`"
            )));
        }
        let map = cursor.as_object_mut().ok_or_else(|| {
            Error::InvalidArgument(format!("override `{key}` does not address an object"))
        })?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Every violated invariant of `config`; empty iff the config can run.
pub fn validate_config(config: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    if config.schema_version != SCHEMA_VERSION {
        v.push(format!(
            "schema_version must be {SCHEMA_VERSION} (got {})",
            config.schema_version
        ));
    }
    if !(config.horizon.is_finite() && config.horizon > 0.0) {
        v.push("horizon must be > 0".into());
    }
    match TimeGrid::new(config.grid.clone()) {
        Ok(grid) => {
            if config.horizon.is_finite() && grid.last() > config.horizon {
                v.push(format!(
                    "grid point {} exceeds horizon {}",
                    grid.last(),
                    config.horizon
                ));
            }
            if grid.len() < 2 {
                v.push("grid must contain at least one positive point".into());
            }
        }
        Err(e) => v.push(format!("grid: {e}")),
    }
    let on_grid = |t: f64| config.grid.contains(&t);

    let mixing_ok = match (&config.kind, &config.mixing) {
        (ProcessKind::Cmpp, None) => {
            v.push("mixing is required for kind cmpp".into());
            false
        }
        (ProcessKind::Cpp, None) => {
            v.push("mixing (degenerate) is required for kind cpp".into());
            false
        }
        (ProcessKind::Cpp, Some(m)) if !matches!(m, MixingSpec::Degenerate { .. }) => {
            v.push("mixing must be degenerate for kind cpp".into());
            false
        }
        (ProcessKind::Renewal, Some(_)) => {
            v.push("mixing is not used by kind renewal".into());
            false
        }
        (_, Some(m)) => {
            let errs = m.violations("mixing");
            let ok = errs.is_empty();
            v.extend(errs);
            ok
        }
        (ProcessKind::Renewal, None) => true,
    };

    let needs_claims = !(config.kind == ProcessKind::Renewal
        && config.renewal_claims == RenewalClaims::Interarrival);
    match &config.claims {
        Some(c) => v.extend(c.violations("claims")),
        None if needs_claims => v.push("claims is required".into()),
        None => {}
    }
    if config.kind == ProcessKind::Renewal {
        match &config.interarrival {
            Some(i) => v.extend(i.violations("interarrival")),
            None => v.push("interarrival is required for kind renewal".into()),
        }
    } else {
        if config.interarrival.is_some() {
            v.push("interarrival is only used by kind renewal".into());
        }
        if config.renewal_claims != RenewalClaims::Independent {
            v.push("renewal_claims is only used by kind renewal".into());
        }
    }

    let suites = config.suite_list();
    if suites.is_empty() {
        v.push("suites must select at least one suite".into());
    }
    if !suites.is_empty() && config.n_paths < MIN_ENSEMBLE_PATHS {
        v.push(format!(
            "n_paths must be >= {MIN_ENSEMBLE_PATHS} for statistical suites (got {})",
            config.n_paths
        ));
    }
    if suites.iter().any(|s| s.uses_functionals()) && config.calibration_paths < MIN_STRATUM_PATHS {
        v.push(format!(
            "calibration_paths must be >= {MIN_STRATUM_PATHS} (got {})",
            config.calibration_paths
        ));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        v.push("alpha must lie in (0, 1)".into());
    }
    if config.max_events == 0 {
        v.push("max_events must be > 0".into());
    }
    if config.functionals.polynomial_degree > crate::harness::functional::MAX_POLYNOMIAL_DEGREE {
        v.push("functionals.polynomial_degree must be <= 2".into());
    }
    // Every supported claim family has finite variance; the z-tests rely on it.
    if let Some(Ok(law)) = config.claims.as_ref().map(|c| ClaimLaw::new(c.clone())) {
        if !law.has_finite_variance() {
            v.push("claims must have finite variance for statistical suites".into());
        }
    }
    if let Some(cuts) = &config.strata {
        if let Err(e) = Strata::new(cuts.clone()) {
            v.push(format!("strata: {e}"));
        }
    }
    if let Some(pairs) = &config.pairs {
        for &(s, t) in pairs {
            if !(on_grid(s) && on_grid(t) && s < t) {
                v.push(format!("pair ({s}, {t}) must be grid points with s < t"));
            }
        }
    }
    if let Some(times) = &config.wald_times {
        for &t in times {
            if !(t >= 0.0 && t <= config.horizon) {
                v.push(format!("wald time {t} lies outside [0, horizon]"));
            }
        }
    }
    if let Some(t) = config.conditional_wald_time {
        if !on_grid(t) {
            v.push(format!("conditional_wald_time {t} must be a grid point"));
        }
    }
    if let Some(times) = &config.watanabe_times {
        for &t in times {
            if !(t > 0.0 && t <= config.horizon) {
                v.push(format!("watanabe time {t} lies outside (0, horizon]"));
            }
        }
    }
    if suites.contains(&Suite::PmfCheck) && config.kind == ProcessKind::Renewal {
        v.push("pmf_check needs a mixing law (kind cmpp or cpp)".into());
    }
    if suites.contains(&Suite::Watanabe)
        && mixing_ok
        && config.kind != ProcessKind::Renewal
        && !matches!(config.mixing, Some(MixingSpec::Degenerate { .. }))
    {
        v.push("watanabe needs degenerate mixing".into());
    }
    v
}

/// A config after validation, with every law and default resolved.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub model: ProcessModel,
    pub mixing: Option<MixingLaw>,
    pub grid: TimeGrid,
    pub strata: Strata,
    pub pairs: Vec<(usize, usize)>,
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let violations = validate_config(self);
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations));
        }
        let grid = TimeGrid::new(self.grid.clone())?;
        let mixing = self.mixing.clone().map(MixingLaw::new).transpose()?;
        let claims = self.claims.clone().map(ClaimLaw::new).transpose()?;
        let model = match self.kind {
            ProcessKind::Cmpp => ProcessModel::Cmpp {
                mixing: mixing.clone().expect("validated"),
                claims: claims.expect("validated"),
            },
            ProcessKind::Cpp => ProcessModel::Cpp {
                theta: mixing
                    .as_ref()
                    .and_then(MixingLaw::point)
                    .expect("validated"),
                claims: claims.expect("validated"),
            },
            ProcessKind::Renewal => {
                let interarrival = ClaimLaw::new(self.interarrival.clone().expect("validated"))?;
                match self.renewal_claims {
                    RenewalClaims::Independent => ProcessModel::Renewal {
                        interarrival,
                        claims: claims.expect("validated"),
                    },
                    RenewalClaims::Interarrival => ProcessModel::CoupledRenewal { interarrival },
                }
            }
        };
        let strata = match (&self.strata, &self.mixing) {
            (Some(cuts), _) => Strata::new(cuts.clone())?,
            (None, Some(MixingSpec::Discrete { atoms, .. })) => Strata::around_atoms(atoms)?,
            _ => Strata::whole(),
        };
        let pairs = match &self.pairs {
            Some(list) => list
                .iter()
                .map(|&(s, t)| {
                    (
                        grid.index_of(s).expect("validated"),
                        grid.index_of(t).expect("validated"),
                    )
                })
                .collect(),
            None => crate::harness::all_pairs(grid.len()),
        };
        Ok(ResolvedConfig {
            model,
            mixing,
            grid,
            strata,
            pairs,
        })
    }
}

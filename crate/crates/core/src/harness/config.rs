//! The experiment configuration document.
//!
//! A single JSON object; unknown keys anywhere are rejected.
//!
//! ```json
//! {
//!   "potential": { "name": "power", "dim": 2, "alpha": 0.5, "lambda": 1.0 },
//!   "smoothing": { "mu": 0.05, "n": 10, "p": 1.5 },
//!   "lmc": { "eta": "auto", "steps": 2000, "chains": 256, "seed": 7 },
//!   "report": { "resamples": 5 }
//! }
//! ```
//!
//! `potential` also accepts `L` (Hölder constant override) and `delta` (Huber
//! width). `lmc` accepts `init` (`{"kind": "point_mass", "at": [..]}` or
//! `{"kind": "gaussian", "mean": [..], "scale": s}`, default the origin) and
//! `gradient` (`"estimated"` or `"exact"`). `report` fields are all optional:
//! `thinning`, `csv`, `json`, `resamples`, `C`, `xstar_norm_sq`, `w2_init`,
//! `reference_w2`.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lmc::{w2_init_upper_estimate, GradientMode, InitialLaw, LmcConfig};
use crate::pgg::PggSpec;
use crate::potential::{build, PotentialSpec, RegularizedPotential};
use crate::smoothing::SmoothingConfig;

/// Fraction of the step-size cap used by `"eta": "auto"`.
pub const AUTO_ETA_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub potential: PotentialSection,
    pub smoothing: SmoothingSection,
    pub lmc: LmcSection,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub name: String,
    pub dim: usize,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    pub mu: f64,
    pub n: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Auto,
    Fixed(f64),
}

impl Serialize for Eta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Eta::Auto => s.serialize_str("auto"),
            Eta::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct EtaVisitor;
        impl Visitor<'_> for EtaVisitor {
            type Value = Eta;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or the string \"auto\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Eta, E> {
                Ok(Eta::Fixed(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Eta, E> {
                Ok(Eta::Fixed(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Eta, E> {
                Ok(Eta::Fixed(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Eta, E> {
                if v == "auto" {
                    Ok(Eta::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(EtaVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmcSection {
    pub eta: Eta,
    pub steps: usize,
    pub chains: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialLaw>,
    #[serde(default = "default_gradient")]
    pub gradient: GradientMode,
}

fn default_gradient() -> GradientMode {
    GradientMode::Estimated
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Trajectory thinning; omitted means no trajectory is stored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning: Option<usize>,
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_json")]
    pub json: String,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    /// Second-moment constant of the mixing bound.
    #[serde(default, rename = "C")]
    pub c: f64,
    #[serde(default)]
    pub xstar_norm_sq: f64,
    /// `W2(init, pi_bar_mu)`; omitted means the analytic upper estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2_init: Option<f64>,
    /// Measure W2 between the final states and exact target draws.
    #[serde(default = "default_true")]
    pub reference_w2: bool,
}

fn default_csv() -> String {
    "samples.csv".into()
}
fn default_json() -> String {
    "report.json".into()
}
fn default_resamples() -> usize {
    5
}
fn default_true() -> bool {
    true
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            thinning: None,
            csv: default_csv(),
            json: default_json(),
            resamples: default_resamples(),
            c: 0.0,
            xstar_norm_sq: 0.0,
            w2_init: None,
            reference_w2: true,
        }
    }
}

/// A configuration document that failed to load.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn potential_spec(&self) -> PotentialSpec {
        PotentialSpec {
            name: self.potential.name.clone(),
            dim: self.potential.dim,
            alpha: self.potential.alpha,
            lipschitz: self.potential.lipschitz,
            delta: self.potential.delta,
        }
    }

    /// Validates every range and builds the runtime objects. Nothing is
    /// sampled here.
    pub fn resolve(&self) -> Result<Resolved> {
        let base = build(&self.potential_spec())?;
        let pot = RegularizedPotential::new(base, self.potential.lambda)?;
        let s = &self.smoothing;
        let scfg = SmoothingConfig::new(s.mu, s.n, PggSpec::new(s.p, self.potential.dim)?)?;
        let cap = pot.max_step_size(s.mu, s.p)?;
        let eta = match self.lmc.eta {
            Eta::Auto => AUTO_ETA_FRACTION * cap,
            Eta::Fixed(v) => v,
        };
        let r = &self.report;
        if r.resamples == 0 {
            return Err(Error::param("report.resamples", "need at least one resample"));
        }
        if !(r.c >= 0.0 && r.c.is_finite()) {
            return Err(Error::param("report.C", format!("must be finite and >= 0, got {}", r.c)));
        }
        if !(r.xstar_norm_sq >= 0.0 && r.xstar_norm_sq.is_finite()) {
            return Err(Error::param("report.xstar_norm_sq", "must be finite and >= 0"));
        }
        if let Some(w) = r.w2_init {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::param("report.w2_init", "must be finite and >= 0"));
            }
        }
        let init = self.lmc.init.clone().unwrap_or_else(|| InitialLaw::origin(pot.dim()));
        let mut lcfg = LmcConfig::new(&pot, &scfg, eta, self.lmc.steps, self.lmc.chains, self.lmc.seed)?
            .with_init(init)
            .with_gradient(self.lmc.gradient);
        if r.thinning.is_some() {
            lcfg = lcfg.with_trajectory(r.thinning);
        }
        lcfg.validate(&pot, &scfg)?;
        let w2_init = match r.w2_init {
            Some(w) => w,
            None => w2_init_upper_estimate(&lcfg.init, pot.dim(), pot.lambda(), r.xstar_norm_sq)?,
        };
        Ok(Resolved { pot, scfg, lcfg, eta_cap: cap, w2_init })
    }
}

/// Runtime objects built from an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub pot: RegularizedPotential,
    pub scfg: SmoothingConfig,
    pub lcfg: LmcConfig,
    pub eta_cap: f64,
    pub w2_init: f64,
}

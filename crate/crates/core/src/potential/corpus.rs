//! Built-in potentials and the name registry used by experiment configs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use super::{certify, Holder, Potential};
use crate::error::{Error, Result};
use crate::pgg::PggSpec;
use crate::rng::{stream, Domain};

pub const BUILTIN_NAMES: &[&str] = &["zero", "quadratic", "power", "l1", "huber"];

/// `U = 0`. With regularization this is the Gaussian target `N(0, I / lambda)`.
#[derive(Debug, Clone)]
pub struct Zero {
    dim: usize,
}

impl Zero {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Potential for Zero {
    fn name(&self) -> &str {
        "zero"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn holder(&self) -> Holder {
        Holder { lipschitz: 0.0, alpha: 1.0 }
    }
    fn subgradient(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
    fn smoothed_gradient(&self, _x: &[f64], _mu: f64, _pgg: &PggSpec, out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
    fn infimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `U = ||x||^2 / 2`, `(1, 1)`-Hölder. Smoothing only adds a constant, so
/// `grad U_mu(x) = x`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    dim: usize,
}

impl Quadratic {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Potential for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn holder(&self) -> Holder {
        Holder { lipschitz: 1.0, alpha: 1.0 }
    }
    fn subgradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(x);
        true
    }
    fn smoothed_gradient(&self, x: &[f64], _mu: f64, _pgg: &PggSpec, out: &mut [f64]) -> bool {
        out.copy_from_slice(x);
        true
    }
    fn infimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `U = ||x||^(1+alpha) / (1 + alpha)` with gradient `||x||^(alpha-1) x`,
/// which is `(2^(1-alpha), alpha)`-Hölder.
#[derive(Debug, Clone)]
pub struct PowerNorm {
    dim: usize,
    alpha: f64,
}

impl PowerNorm {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { dim, alpha })
    }
}

impl Potential for PowerNorm {
    fn name(&self) -> &str {
        "power"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.powf(1.0 + self.alpha) / (1.0 + self.alpha)
    }
    fn holder(&self) -> Holder {
        Holder { lipschitz: 2f64.powf(1.0 - self.alpha), alpha: self.alpha }
    }
    fn subgradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            out.fill(0.0);
        } else {
            let s = r.powf(self.alpha - 1.0);
            for (o, v) in out.iter_mut().zip(x) {
                *o = s * v;
            }
        }
        true
    }
    fn infimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `U = ||x||_1`, `(2 sqrt(d), 0)`-Hölder; subgradient `sign(x)` with 0 at kinks.
#[derive(Debug, Clone)]
pub struct L1Norm {
    dim: usize,
    holder: Holder,
}

impl L1Norm {
    pub fn new(dim: usize) -> Self {
        let holder = Holder { lipschitz: 2.0 * (dim as f64).sqrt(), alpha: 0.0 };
        Self { dim, holder }
    }

    pub fn with_holder(dim: usize, holder: Holder) -> Self {
        Self { dim, holder }
    }
}

impl Potential for L1Norm {
    fn name(&self) -> &str {
        "l1"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }
    fn holder(&self) -> Holder {
        self.holder
    }
    fn subgradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        for (o, v) in out.iter_mut().zip(x) {
            *o = sign0(*v);
        }
        true
    }
    /// `E sign(x_j + mu xi_j) = sign(x_j) P(|xi_j| < |x_j| / mu)`, and
    /// `|xi_j|^p ~ Gamma(1/p, p)` gives that probability as a regularized
    /// incomplete gamma function.
    fn smoothed_gradient(&self, x: &[f64], mu: f64, pgg: &PggSpec, out: &mut [f64]) -> bool {
        let p = pgg.p();
        for (o, v) in out.iter_mut().zip(x) {
            *o = if *v == 0.0 {
                0.0
            } else {
                let t = (v.abs() / mu).powf(p) / p;
                sign0(*v) * gamma_lr(1.0 / p, t)
            };
        }
        true
    }
    fn infimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Coordinatewise Huber loss with width `delta`: `t^2 / (2 delta)` inside,
/// `|t| - delta / 2` outside; `(1/delta, 1)`-Hölder.
#[derive(Debug, Clone)]
pub struct Huber {
    dim: usize,
    delta: f64,
}

impl Huber {
    pub fn new(dim: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("must be finite and > 0, got {delta}")));
        }
        Ok(Self { dim, delta })
    }
}

impl Potential for Huber {
    fn name(&self) -> &str {
        "huber"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|t| {
                let a = t.abs();
                if a <= self.delta {
                    0.5 * t * t / self.delta
                } else {
                    a - 0.5 * self.delta
                }
            })
            .sum()
    }
    fn holder(&self) -> Holder {
        Holder { lipschitz: 1.0 / self.delta, alpha: 1.0 }
    }
    fn subgradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        for (o, t) in out.iter_mut().zip(x) {
            *o = (t / self.delta).clamp(-1.0, 1.0);
        }
        true
    }
    fn infimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A built-in potential whose regularity was overridden by the user.
#[derive(Debug)]
struct Declared {
    inner: Arc<dyn Potential>,
    holder: Holder,
}

impl Potential for Declared {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }
    fn holder(&self) -> Holder {
        self.holder
    }
    fn subgradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        self.inner.subgradient(x, out)
    }
    fn smoothed_gradient(&self, x: &[f64], mu: f64, pgg: &PggSpec, out: &mut [f64]) -> bool {
        self.inner.smoothed_gradient(x, mu, pgg, out)
    }
    fn infimum(&self) -> Option<f64> {
        self.inner.infimum()
    }
}

/// Registry key plus parameters, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub name: String,
    pub dim: usize,
    /// Hölder exponent; required for `power`, an override for the others.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Hölder constant override.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Huber width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

const CERTIFY_PAIRS: usize = 1000;

/// Instantiates a built-in potential. User-declared `(L, alpha)` overrides are
/// trusted, then spot-checked; a failed check is logged, not an error.
pub fn build(spec: &PotentialSpec) -> Result<Arc<dyn Potential>> {
    let d = spec.dim;
    if d == 0 {
        return Err(Error::param("dim", "dimension must be at least 1"));
    }
    let base: Arc<dyn Potential> = match spec.name.as_str() {
        "zero" => Arc::new(Zero::new(d)),
        "quadratic" => Arc::new(Quadratic::new(d)),
        "power" => {
            let alpha = spec.alpha.ok_or_else(|| Error::param("alpha", "the `power` potential needs `alpha`"))?;
            Arc::new(PowerNorm::new(d, alpha)?)
        }
        "l1" => Arc::new(L1Norm::new(d)),
        "huber" => Arc::new(Huber::new(d, spec.delta.unwrap_or(1.0))?),
        other => {
            return Err(Error::param("name", format!("unknown potential `{other}`; expected one of {BUILTIN_NAMES:?}")))
        }
    };
    if spec.delta.is_some() && spec.name != "huber" {
        return Err(Error::param("delta", "only the `huber` potential takes `delta`"));
    }
    let declared = base.holder();
    let alpha_override = if spec.name == "power" { None } else { spec.alpha };
    if spec.lipschitz.is_none() && alpha_override.is_none() {
        return Ok(base);
    }
    let holder = Holder::new(spec.lipschitz.unwrap_or(declared.lipschitz), alpha_override.unwrap_or(declared.alpha))?;
    let pot: Arc<dyn Potential> = Arc::new(Declared { inner: base, holder });
    let mut rng = stream(0, Domain::Verify, 0);
    if let Some(cert) = certify(pot.as_ref(), CERTIFY_PAIRS, &mut rng) {
        if !cert.passed() {
            log::warn!(
                "declared regularity (L = {}, alpha = {}) for `{}` failed spot-checks: {:?}",
                holder.lipschitz,
                holder.alpha,
                spec.name,
                cert
            );
        }
    }
    Ok(pot)
}

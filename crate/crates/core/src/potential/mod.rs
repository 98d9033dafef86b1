//! Black-box potentials and the ridge-regularized potential built on them.
//!
//! A [`Potential`] only has to evaluate `U(x)`. Everything else (a
//! subgradient, a closed-form smoothed gradient, a known infimum) is optional
//! and used for certification, reference values and ablations.

mod corpus;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pgg::PggSpec;

pub use corpus::{build, Huber, L1Norm, PotentialSpec, PowerNorm, Quadratic, Zero, BUILTIN_NAMES};

/// Declared Hölder regularity of the (sub)gradient:
/// `||grad U(x) - grad U(y)|| <= L ||x - y||^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holder {
    pub lipschitz: f64,
    pub alpha: f64,
}

impl Holder {
    pub fn new(lipschitz: f64, alpha: f64) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::param("L", format!("must be finite and >= 0, got {lipschitz}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { lipschitz, alpha })
    }
}

pub trait Potential: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn holder(&self) -> Holder;

    /// Writes some element of the subdifferential at `x` into `out`.
    /// Returns `false` when the potential is value-only.
    fn subgradient(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Writes the exact gradient of the smoothed potential
    /// `U_mu(x) = E U(x + mu xi)`, `xi ~ N_p(0, I)`, when a closed form exists.
    fn smoothed_gradient(&self, _x: &[f64], _mu: f64, _pgg: &PggSpec, _out: &mut [f64]) -> bool {
        false
    }

    /// `inf U` when known; enables exact sampling of the regularized target.
    fn infimum(&self) -> Option<f64> {
        None
    }
}

/// `U(x) + (lambda / 2) ||x||^2`.
#[derive(Debug, Clone)]
pub struct RegularizedPotential {
    base: Arc<dyn Potential>,
    lambda: f64,
}

pub fn regularize(base: Arc<dyn Potential>, lambda: f64) -> Result<RegularizedPotential> {
    RegularizedPotential::new(base, lambda)
}

impl RegularizedPotential {
    pub fn new(base: Arc<dyn Potential>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be finite and > 0, got {lambda}")));
        }
        Ok(Self { base, lambda })
    }

    /// `lambda = 0`: the bare potential behind the same interface. Bounds that
    /// divide by `lambda` report [`Error::Unsupported`] for it.
    pub fn unregularized(base: Arc<dyn Potential>) -> Self {
        Self { base, lambda: 0.0 }
    }

    pub fn base(&self) -> &Arc<dyn Potential> {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn holder(&self) -> Holder {
        self.base.holder()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        self.base.value(x) + 0.5 * self.lambda * sq
    }

    pub fn subgradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        if !self.base.subgradient(x, out) {
            return false;
        }
        for (o, xi) in out.iter_mut().zip(x) {
            *o += self.lambda * xi;
        }
        true
    }

    /// Closed-form `grad Ubar_mu(x)`; the quadratic term smooths to itself up
    /// to a constant, so only the base needs a registered form.
    pub fn smoothed_gradient(&self, x: &[f64], mu: f64, pgg: &PggSpec, out: &mut [f64]) -> bool {
        if !self.base.smoothed_gradient(x, mu, pgg, out) {
            return false;
        }
        for (o, xi) in out.iter_mut().zip(x) {
            *o += self.lambda * xi;
        }
        true
    }

    pub fn has_smoothed_gradient(&self) -> bool {
        let d = self.dim();
        let pgg = PggSpec::new(2.0, d).expect("valid");
        let mut scratch = vec![0.0; d];
        self.base.smoothed_gradient(&vec![0.0; d], 1.0, &pgg, &mut scratch)
    }

    /// `M`, the smoothness constant of the smoothed base potential.
    pub fn smoothness_constant(&self, mu: f64, p: f64) -> Result<f64> {
        smoothness_constant(self.holder(), self.dim(), mu, p)
    }

    /// `a`, the uniform bound on `|Ubar_mu - Ubar|`.
    pub fn perturbation_scale(&self, mu: f64, p: f64) -> Result<f64> {
        perturbation_scale(self.holder(), self.dim(), self.lambda, mu, p)
    }

    /// `2 / (M + 2 lambda)`; step sizes must be strictly below it.
    pub fn max_step_size(&self, mu: f64, p: f64) -> Result<f64> {
        Ok(step_size_cap(self.smoothness_constant(mu, p)?, self.lambda))
    }

    /// Exact draw from `pi_bar ~ exp(-Ubar)` by rejection from
    /// `N(0, I / lambda)` with acceptance `exp(-(U(y) - inf U))`.
    /// `None` when the base infimum is unknown.
    pub fn sample_target<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        if self.lambda <= 0.0 {
            return None;
        }
        let floor = self.base.infimum()?;
        let d = self.dim();
        let sd = 1.0 / self.lambda.sqrt();
        let mut y = vec![0.0; d];
        loop {
            for v in y.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = sd * z;
            }
            let accept = (-(self.base.value(&y) - floor)).exp();
            let u: f64 = rng.random();
            if u < accept {
                return Some(y);
            }
        }
    }
}

fn check_mu_p(mu: f64, p: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("must be finite and > 0, got {mu}")));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::param("p", format!("must lie in [1, 2], got {p}")));
    }
    Ok(())
}

/// `M = L d^((1 - alpha)/p) / (mu^(1 - alpha) (1 + alpha)^(1 - alpha))`.
pub fn smoothness_constant(holder: Holder, dim: usize, mu: f64, p: f64) -> Result<f64> {
    check_mu_p(mu, p)?;
    let Holder { lipschitz: l, alpha } = holder;
    let d = dim as f64;
    let e = 1.0 - alpha;
    Ok(l * d.powf(e / p) / (mu.powf(e) * (1.0 + alpha).powf(e)))
}

/// `a = L mu^(1+alpha) d^((1+alpha)/p) / (1 + alpha) + lambda mu^2 (d + 1)^(2/p) / 2`.
pub fn perturbation_scale(holder: Holder, dim: usize, lambda: f64, mu: f64, p: f64) -> Result<f64> {
    check_mu_p(mu, p)?;
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", format!("must be >= 0, got {lambda}")));
    }
    let Holder { lipschitz: l, alpha } = holder;
    let d = dim as f64;
    let smoothing = l * mu.powf(1.0 + alpha) * d.powf((1.0 + alpha) / p) / (1.0 + alpha);
    let ridge = 0.5 * lambda * mu * mu * (d + 1.0).powf(2.0 / p);
    Ok(smoothing + ridge)
}

pub fn step_size_cap(m: f64, lambda: f64) -> f64 {
    2.0 / (m + 2.0 * lambda)
}

/// Outcome of randomized spot-checks of the declared regularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    pub pairs: usize,
    pub holder_violations: usize,
    pub convexity_violations: usize,
    pub descent_violations: usize,
    /// `max ||g(x) - g(y)|| / ||x - y||^alpha` over the sampled pairs.
    pub worst_holder_ratio: f64,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.holder_violations == 0 && self.convexity_violations == 0 && self.descent_violations == 0
    }
}

const CERT_RTOL: f64 = 1e-9;
const CERT_ATOL: f64 = 1e-10;

/// Spot-checks convexity, the Hölder condition and the induced descent
/// inequality on `pairs` random pairs with `||x - y|| <= 10`.
/// `None` when the potential exposes no subgradient.
pub fn certify<R: Rng + ?Sized>(pot: &dyn Potential, pairs: usize, rng: &mut R) -> Option<Certification> {
    let d = pot.dim();
    let Holder { lipschitz: l, alpha } = pot.holder();
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut cert = Certification {
        pairs,
        holder_violations: 0,
        convexity_violations: 0,
        descent_violations: 0,
        worst_holder_ratio: 0.0,
    };
    for _ in 0..pairs {
        random_pair(rng, &mut x, &mut y);
        if !pot.subgradient(&x, &mut gx) || !pot.subgradient(&y, &mut gy) {
            return None;
        }
        let r = dist(&x, &y);
        if r == 0.0 {
            continue;
        }
        let gdiff = dist(&gx, &gy);
        let ratio = gdiff / r.powf(alpha);
        cert.worst_holder_ratio = cert.worst_holder_ratio.max(ratio);
        if gdiff > l * r.powf(alpha) * (1.0 + CERT_RTOL) + CERT_ATOL {
            cert.holder_violations += 1;
        }
        let ux = pot.value(&x);
        let uy = pot.value(&y);
        let lin: f64 = gx.iter().zip(y.iter().zip(&x)).map(|(g, (b, a))| g * (b - a)).sum();
        let scale = 1.0 + ux.abs() + uy.abs();
        if uy < ux + lin - CERT_RTOL * scale {
            cert.convexity_violations += 1;
        }
        if uy > ux + lin + l * r.powf(1.0 + alpha) / (1.0 + alpha) + CERT_RTOL * scale {
            cert.descent_violations += 1;
        }
    }
    Some(cert)
}

// x uniform in [-5, 5]^d, y = x + r u with u uniform on the sphere and
// r in (0, 10], skewed towards small separations.
pub(crate) fn random_pair<R: Rng + ?Sized>(rng: &mut R, x: &mut [f64], y: &mut [f64]) {
    for v in x.iter_mut() {
        *v = rng.random_range(-5.0..5.0);
    }
    let mut norm = 0.0;
    for v in y.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = z;
        norm += z * z;
    }
    let norm = norm.sqrt().max(f64::MIN_POSITIVE);
    let u: f64 = rng.random();
    let r = 10.0 * u.powi(3).max(1e-12);
    for (yv, xv) in y.iter_mut().zip(x.iter()) {
        *yv = xv + r * *yv / norm;
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

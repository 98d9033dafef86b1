//! p-generalized Gaussian smoothing and the zeroth-order gradient estimator.
//!
//! For `xi ~ N_p(0, I)` the smoothed potential is `U_mu(x) = E U(x + mu xi)`
//! and its gradient satisfies
//!
//! ```text
//! grad U_mu(x) = E[ (U(x + mu xi) - U(x)) / mu * (xi o |xi|^(p-2)) ]
//! ```
//!
//! which the estimator [`grad_estimate`] averages over `n` fresh draws. The
//! weight `xi o |xi|^(p-2)` is evaluated as `sign(xi_j) |xi_j|^(p-1)` (and 0
//! at `xi_j = 0`), which stays finite for every `p` in `[1, 2]`.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::numeric::RunningMoments;
use crate::pgg::PggSpec;
use crate::potential::{smoothness_constant, Potential, RegularizedPotential};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    mu: f64,
    batch: usize,
    pgg: PggSpec,
}

impl SmoothingConfig {
    pub fn new(mu: f64, batch: usize, pgg: PggSpec) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::param("mu", format!("must be finite and > 0, got {mu}")));
        }
        if batch == 0 {
            return Err(Error::param("n", "batch size must be at least 1"));
        }
        Ok(Self { mu, batch, pgg })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Number of perturbation draws per gradient estimate.
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn pgg(&self) -> &PggSpec {
        &self.pgg
    }

    pub fn p(&self) -> f64 {
        self.pgg.p()
    }

    pub fn dim(&self) -> usize {
        self.pgg.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub value: Vec<f64>,
    pub draws_used: usize,
    /// Always `n + 1`: one evaluation per draw plus the base point.
    pub function_evals: usize,
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// `xi o |xi|^(p-2)` for one coordinate.
#[inline]
pub fn hadamard_weight(xi: f64, p: f64) -> f64 {
    if xi == 0.0 {
        0.0
    } else if p == 2.0 {
        xi
    } else if p == 1.0 {
        xi.signum()
    } else {
        xi.signum() * xi.abs().powf(p - 1.0)
    }
}

fn check_config(pot: &RegularizedPotential, cfg: &SmoothingConfig, x: &[f64]) -> Result<()> {
    check_dim(pot.dim(), cfg.dim())?;
    check_dim(pot.dim(), x.len())
}

#[inline]
fn eval_finite(pot: &RegularizedPotential, y: &[f64]) -> Result<f64> {
    let v = pot.value(y);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation { point: y.to_vec(), value: v })
    }
}

/// `(1/m) sum Ubar(x + mu xi_i)`, a Monte Carlo estimate of `Ubar_mu(x)`.
pub fn smoothed_value_mc<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_config(pot, cfg, x)?;
    if m == 0 {
        return Err(Error::param("m", "need at least one draw"));
    }
    let d = x.len();
    let mut xi = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut acc = RunningMoments::new();
    for _ in 0..m {
        cfg.pgg.sample_into(rng, &mut xi);
        for j in 0..d {
            y[j] = x[j] + cfg.mu * xi[j];
        }
        acc.push(eval_finite(pot, &y)?);
    }
    Ok(McEstimate { value: acc.mean(), std_error: acc.std_error(), samples: m })
}

/// Scratch buffers for allocation-free estimation inside chain loops.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    xi: Vec<f64>,
    y: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(dim: usize) -> Self {
        Self { xi: vec![0.0; dim], y: vec![0.0; dim] }
    }
}

/// Writes `g_{mu,n}(x)` into `out`, drawing `n` fresh perturbations from `rng`.
pub(crate) fn estimate_into<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    rng: &mut R,
    out: &mut [f64],
    scratch: &mut Scratch,
) -> Result<()> {
    let d = x.len();
    let p = cfg.p();
    let f0 = eval_finite(pot, x)?;
    out.fill(0.0);
    for _ in 0..cfg.batch {
        cfg.pgg.sample_into(rng, &mut scratch.xi);
        for j in 0..d {
            scratch.y[j] = x[j] + cfg.mu * scratch.xi[j];
        }
        let coeff = (eval_finite(pot, &scratch.y)? - f0) / cfg.mu;
        for j in 0..d {
            out[j] += coeff * hadamard_weight(scratch.xi[j], p);
        }
    }
    let n = cfg.batch as f64;
    for o in out.iter_mut() {
        *o /= n;
    }
    Ok(())
}

/// The black-box estimator
/// `g_{mu,n}(x) = (1/n) sum_i (Ubar(x + mu xi_i) - Ubar(x)) / mu * (xi_i o |xi_i|^(p-2))`.
pub fn grad_estimate<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_config(pot, cfg, x)?;
    let mut value = vec![0.0; x.len()];
    let mut scratch = Scratch::new(x.len());
    estimate_into(pot, cfg, x, rng, &mut value, &mut scratch)?;
    Ok(GradientEstimate { value, draws_used: cfg.batch, function_evals: cfg.batch + 1 })
}

/// Same estimator on caller-supplied perturbations: `draws` holds `n` rows of
/// length `d`, row-major.
pub fn grad_estimate_from_draws(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    draws: &[f64],
) -> Result<GradientEstimate> {
    check_config(pot, cfg, x)?;
    let d = x.len();
    if draws.len() != d * cfg.batch {
        return Err(Error::Dimension { expected: d * cfg.batch, got: draws.len() });
    }
    let p = cfg.p();
    let f0 = eval_finite(pot, x)?;
    let mut value = vec![0.0; d];
    let mut y = vec![0.0; d];
    for xi in draws.chunks_exact(d) {
        for j in 0..d {
            y[j] = x[j] + cfg.mu * xi[j];
        }
        let coeff = (eval_finite(pot, &y)? - f0) / cfg.mu;
        for j in 0..d {
            value[j] += coeff * hadamard_weight(xi[j], p);
        }
    }
    let n = cfg.batch as f64;
    for v in value.iter_mut() {
        *v /= n;
    }
    Ok(GradientEstimate { value, draws_used: cfg.batch, function_evals: cfg.batch + 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    /// Registered closed form of `grad Ubar_mu`.
    ClosedForm,
    /// Monte Carlo average of `grad Ubar(x + mu xi)`.
    SubgradientMonteCarlo,
    /// Monte Carlo average of the zeroth-order identity.
    ZerothOrderMonteCarlo,
}

/// High-accuracy estimate of `grad Ubar_mu(x)` with per-coordinate standard
/// errors (zero for closed forms).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceGradient {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
    pub method: ReferenceMethod,
    pub draws: usize,
}

/// Ground truth for `grad Ubar_mu(x)`: a registered closed form if there is
/// one, otherwise `E grad Ubar(x + mu xi)` over `m` draws when a subgradient
/// is available, otherwise the zeroth-order identity over `m` draws.
pub fn smoothed_gradient_reference<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<ReferenceGradient> {
    check_config(pot, cfg, x)?;
    let d = x.len();
    let mut value = vec![0.0; d];
    if pot.smoothed_gradient(x, cfg.mu, &cfg.pgg, &mut value) {
        return Ok(ReferenceGradient { value, std_error: vec![0.0; d], method: ReferenceMethod::ClosedForm, draws: 0 });
    }
    if pot.subgradient(x, &mut value) {
        return subgradient_reference(pot, cfg, x, m, rng);
    }
    zeroth_order_reference(pot, cfg, x, m, rng)
}

fn subgradient_reference<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<ReferenceGradient> {
    if m == 0 {
        return Err(Error::param("m", "need at least one draw"));
    }
    let d = x.len();
    let mut xi = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut acc = vec![RunningMoments::new(); d];
    for _ in 0..m {
        cfg.pgg.sample_into(rng, &mut xi);
        for j in 0..d {
            y[j] = x[j] + cfg.mu * xi[j];
        }
        pot.subgradient(&y, &mut g);
        for j in 0..d {
            acc[j].push(g[j]);
        }
    }
    Ok(ReferenceGradient {
        value: acc.iter().map(|a| a.mean()).collect(),
        std_error: acc.iter().map(|a| a.std_error()).collect(),
        method: ReferenceMethod::SubgradientMonteCarlo,
        draws: m,
    })
}

/// `(1/mu) E[(Ubar(x + mu xi) - Ubar(x)) (xi o |xi|^(p-2))]` over `m` draws,
/// regardless of what else the potential exposes.
pub fn zeroth_order_reference<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<ReferenceGradient> {
    check_config(pot, cfg, x)?;
    if m == 0 {
        return Err(Error::param("m", "need at least one draw"));
    }
    let d = x.len();
    let p = cfg.p();
    let f0 = eval_finite(pot, x)?;
    let mut xi = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut acc = vec![RunningMoments::new(); d];
    for _ in 0..m {
        cfg.pgg.sample_into(rng, &mut xi);
        for j in 0..d {
            y[j] = x[j] + cfg.mu * xi[j];
        }
        let coeff = (eval_finite(pot, &y)? - f0) / cfg.mu;
        for j in 0..d {
            acc[j].push(coeff * hadamard_weight(xi[j], p));
        }
    }
    Ok(ReferenceGradient {
        value: acc.iter().map(|a| a.mean()).collect(),
        std_error: acc.iter().map(|a| a.std_error()).collect(),
        method: ReferenceMethod::ZerothOrderMonteCarlo,
        draws: m,
    })
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::param("mu", format!("must be finite and > 0, got {mu}")))
    }
}

/// Upper bound on `U_mu(x) - U(x)`: `L mu^(1+alpha) d^((1+alpha)/p) / (1 + alpha)`.
///
/// This simplified form needs `d` large enough; see
/// [`lemma1_gap_envelope`] for the form that holds at every `d`.
pub fn lemma1_gap_bound(pot: &dyn Potential, mu: f64, p: f64) -> Result<f64> {
    check_mu(mu)?;
    let h = pot.holder();
    let d = pot.dim() as f64;
    Ok(h.lipschitz * mu.powf(1.0 + h.alpha) * d.powf((1.0 + h.alpha) / p) / (1.0 + h.alpha))
}

/// `L mu^(1+alpha) (2 d (d + p) / p)^((1+alpha)/(2p)) / (1 + alpha)`, the
/// bound before the large-`d` simplification. Valid for all `d >= 1`.
pub fn lemma1_gap_envelope(pot: &dyn Potential, mu: f64, p: f64) -> Result<f64> {
    check_mu(mu)?;
    let h = pot.holder();
    let d = pot.dim() as f64;
    let inner = 2.0 * d * (d + p) / p;
    Ok(h.lipschitz * mu.powf(1.0 + h.alpha) * inner.powf((1.0 + h.alpha) / (2.0 * p)) / (1.0 + h.alpha))
}

/// `(M + lambda)^2 mu^2 d^(2/p)`.
pub fn lemma2_bias_bound(m: f64, lambda: f64, mu: f64, dim: usize, p: f64) -> f64 {
    let d = dim as f64;
    (m + lambda).powi(2) * mu * mu * d.powf(2.0 / p)
}

/// `(1/n) (0.5 (M + lambda) mu (d+3)^(3/p) + sqrt(2) (d+2)^(2/p) ||grad Ubar_mu(x)||)^2`.
pub fn lemma2_variance_bound(m: f64, lambda: f64, mu: f64, dim: usize, p: f64, batch: usize, grad_norm: f64) -> f64 {
    let d = dim as f64;
    let a = 0.5 * (m + lambda) * mu * (d + 3.0).powf(3.0 / p);
    let b = std::f64::consts::SQRT_2 * (d + 2.0).powf(2.0 / p) * grad_norm;
    (a + b).powi(2) / batch as f64
}

/// Empirical bias and variance of `g_{mu,n}(x)` next to the matching bounds.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BiasVarianceReport {
    pub trials: usize,
    pub batch: usize,
    /// `mean(g) - reference`, per coordinate.
    pub empirical_bias: Vec<f64>,
    pub empirical_bias_norm_sq: f64,
    /// Standard error of `||mean(g) - reference||` (estimator and reference noise).
    pub bias_std_error: f64,
    pub bias_coordinate_se: Vec<f64>,
    /// `E ||g - E g||^2`, unbiased.
    pub empirical_variance: f64,
    pub variance_std_error: f64,
    pub bias_bound: f64,
    pub variance_bound: f64,
    pub reference_gradient: Vec<f64>,
    pub reference_method: ReferenceMethod,
}

impl BiasVarianceReport {
    /// `||bias|| <= sqrt(bias_bound) + k * se`.
    pub fn bias_within_bound(&self, k: f64) -> bool {
        self.empirical_bias_norm_sq.sqrt() <= self.bias_bound.sqrt() + k * self.bias_std_error
    }

    pub fn variance_within_bound(&self, k: f64) -> bool {
        self.empirical_variance <= self.variance_bound + k * self.variance_std_error
    }

    /// Every bias coordinate within `k` of its own standard errors of zero.
    pub fn unbiased_within(&self, k: f64) -> bool {
        self.empirical_bias.iter().zip(&self.bias_coordinate_se).all(|(b, se)| b.abs() <= k * se)
    }
}

/// Draws `trials` independent estimates at `x` and compares them with a
/// reference gradient (closed form, or `100 * trials` Monte Carlo draws).
pub fn measure_bias_variance<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    cfg: &SmoothingConfig,
    x: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<BiasVarianceReport> {
    check_config(pot, cfg, x)?;
    if trials < 2 {
        return Err(Error::param("trials", "need at least two trials"));
    }
    let d = x.len();
    let reference = smoothed_gradient_reference(pot, cfg, x, 100 * trials, rng)?;

    let mut samples = vec![0.0; trials * d];
    let mut scratch = Scratch::new(d);
    for row in samples.chunks_exact_mut(d) {
        estimate_into(pot, cfg, x, rng, row, &mut scratch)?;
    }
    let mut coord = vec![RunningMoments::new(); d];
    for row in samples.chunks_exact(d) {
        for j in 0..d {
            coord[j].push(row[j]);
        }
    }
    let mean: Vec<f64> = coord.iter().map(|c| c.mean()).collect();
    let mut spread = RunningMoments::new();
    for row in samples.chunks_exact(d) {
        spread.push(row.iter().zip(&mean).map(|(g, m)| (g - m) * (g - m)).sum());
    }
    let t = trials as f64;
    // centering on the sample mean loses one degree of freedom
    let empirical_variance = spread.mean() * t / (t - 1.0);

    let empirical_bias: Vec<f64> = mean.iter().zip(&reference.value).map(|(m, r)| m - r).collect();
    let bias_coordinate_se: Vec<f64> =
        coord.iter().zip(&reference.std_error).map(|(c, rse)| (c.std_error().powi(2) + rse * rse).sqrt()).collect();
    let bias_std_error = bias_coordinate_se.iter().map(|s| s * s).sum::<f64>().sqrt();

    let m = smoothness_constant(pot.holder(), d, cfg.mu, cfg.p())?;
    let grad_norm = reference.value.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(BiasVarianceReport {
        trials,
        batch: cfg.batch,
        empirical_bias_norm_sq: empirical_bias.iter().map(|b| b * b).sum(),
        empirical_bias,
        bias_std_error,
        bias_coordinate_se,
        empirical_variance,
        variance_std_error: spread.std_error(),
        bias_bound: lemma2_bias_bound(m, pot.lambda(), cfg.mu, d, cfg.p()),
        variance_bound: lemma2_variance_bound(m, pot.lambda(), cfg.mu, d, cfg.p(), cfg.batch, grad_norm),
        reference_gradient: reference.value,
        reference_method: reference.method,
    })
}

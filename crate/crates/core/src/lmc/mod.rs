//! Langevin Monte Carlo driven by the black-box gradient estimator:
//!
//! ```text
//! x_{k+1} = x_k - eta * g_{mu,n}(x_k) + sqrt(2 eta) * s_k,   s_k ~ N(0, I)
//! ```
//!
//! The injected noise `s_k` is always standard Gaussian; only the smoothing
//! perturbations inside `g_{mu,n}` follow `N_p`. Both are redrawn every step.

mod bounds;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, ChainDivergence, Error, Result};
use crate::potential::RegularizedPotential;
use crate::rng::{stream, Domain};
use crate::smoothing::{estimate_into, Scratch, SmoothingConfig};
use crate::transport::SampleSet;

pub use bounds::{
    geometric_factor, lemma3_from_scale, lemma3_w2_bound, theorem1_bound, w2_init_upper_estimate, BoundTerm,
    Lemma3Bound, TheoryBound,
};

/// Chains stop once `||x_k||` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    PointMass { at: Vec<f64> },
    Gaussian { mean: Vec<f64>, scale: f64 },
}

impl InitialLaw {
    pub fn origin(dim: usize) -> Self {
        InitialLaw::PointMass { at: vec![0.0; dim] }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            InitialLaw::PointMass { at } => check_dim(dim, at.len()),
            InitialLaw::Gaussian { mean, scale } => {
                check_dim(dim, mean.len())?;
                if !(*scale >= 0.0 && scale.is_finite()) {
                    return Err(Error::param("init.scale", format!("must be finite and >= 0, got {scale}")));
                }
                Ok(())
            }
        }
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            InitialLaw::PointMass { at } => out.copy_from_slice(at),
            InitialLaw::Gaussian { mean, scale } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + scale * z;
                }
            }
        }
    }

    /// `E ||X||^2` under this law.
    pub fn second_moment(&self) -> f64 {
        match self {
            InitialLaw::PointMass { at } => at.iter().map(|v| v * v).sum(),
            InitialLaw::Gaussian { mean, scale } => {
                mean.iter().map(|v| v * v).sum::<f64>() + scale * scale * mean.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// The zeroth-order estimator `g_{mu,n}`.
    Estimated,
    /// A registered closed form of `grad Ubar_mu` (ablation).
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmcConfig {
    pub eta: f64,
    pub steps: usize,
    pub chains: usize,
    pub init: InitialLaw,
    pub seed: u64,
    pub gradient: GradientMode,
    /// Keep every `t`-th state in the trajectory; `None` means `max(1, K / 1000)`.
    pub thinning: Option<usize>,
    pub record_trajectory: bool,
}

impl LmcConfig {
    /// Estimated-gradient config starting from the origin; the step size is
    /// checked against `2 / (M + 2 lambda)`.
    pub fn new(
        pot: &RegularizedPotential,
        scfg: &SmoothingConfig,
        eta: f64,
        steps: usize,
        chains: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            eta,
            steps,
            chains,
            init: InitialLaw::origin(pot.dim()),
            seed,
            gradient: GradientMode::Estimated,
            thinning: None,
            record_trajectory: false,
        };
        cfg.validate(pot, scfg)?;
        Ok(cfg)
    }

    pub fn with_init(mut self, init: InitialLaw) -> Self {
        self.init = init;
        self
    }

    pub fn with_gradient(mut self, mode: GradientMode) -> Self {
        self.gradient = mode;
        self
    }

    pub fn with_trajectory(mut self, thinning: Option<usize>) -> Self {
        self.record_trajectory = true;
        self.thinning = thinning;
        self
    }

    pub fn thinning_interval(&self) -> usize {
        self.thinning.unwrap_or((self.steps / 1000).max(1)).max(1)
    }

    pub fn validate(&self, pot: &RegularizedPotential, scfg: &SmoothingConfig) -> Result<()> {
        check_dim(pot.dim(), scfg.dim())?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("must be finite and > 0, got {}", self.eta)));
        }
        let cap = pot.max_step_size(scfg.mu(), scfg.p())?;
        if self.eta >= cap {
            return Err(Error::StepSize { eta: self.eta, cap });
        }
        if self.chains == 0 {
            return Err(Error::param("chains", "need at least one chain"));
        }
        if self.thinning == Some(0) {
            return Err(Error::param("thinning", "must be at least 1"));
        }
        self.init.validate(pot.dim())?;
        if self.gradient == GradientMode::Exact && !pot.has_smoothed_gradient() {
            return Err(Error::Unsupported(format!(
                "exact-gradient mode needs a closed-form smoothed gradient, `{}` has none",
                pot.base().name()
            )));
        }
        Ok(())
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub potential: String,
    pub dim: usize,
    pub seed: u64,
    pub eta: f64,
    pub steps: usize,
    pub chains: usize,
    pub mu: f64,
    pub batch: usize,
    pub p: f64,
    pub lambda: f64,
    pub gradient: GradientMode,
    pub init: InitialLaw,
}

/// Thinned chain states: `states[s]` is a `chains x dim` row-major block
/// recorded after `steps[s]` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<usize>,
    pub states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub dim: usize,
    pub chains: usize,
    /// `chains x dim`, row-major, ordered by chain index.
    pub final_states: Vec<f64>,
    pub trajectory: Option<Trajectory>,
    /// Potential evaluations across all chains: `chains * K * (n + 1)` when
    /// the estimator is used, 0 in exact-gradient mode.
    pub evals_total: u64,
    pub provenance: Provenance,
}

impl ChainResult {
    pub fn state(&self, chain: usize) -> &[f64] {
        &self.final_states[chain * self.dim..(chain + 1) * self.dim]
    }

    pub fn final_sample_set(&self) -> SampleSet {
        SampleSet::new(self.final_states.clone(), self.dim).expect("chain states are finite")
    }
}

/// `x - eta * grad + sqrt(2 eta) * noise`.
pub fn langevin_update(x: &[f64], grad: &[f64], eta: f64, noise: &[f64]) -> Vec<f64> {
    let s = (2.0 * eta).sqrt();
    x.iter().zip(grad).zip(noise).map(|((x, g), z)| x - eta * g + s * z).collect()
}

/// One update with the black-box estimator and fresh Gaussian noise. A
/// diverging update is reported as chain 0, step 1.
pub fn lmc_step<R: Rng + ?Sized>(
    pot: &RegularizedPotential,
    scfg: &SmoothingConfig,
    x: &[f64],
    eta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(pot.dim(), scfg.dim())?;
    check_dim(pot.dim(), x.len())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", format!("must be finite and > 0, got {eta}")));
    }
    let mut state = x.to_vec();
    let mut stepper = Stepper::new(pot, scfg, eta, GradientMode::Estimated);
    stepper
        .advance(&mut state, rng)
        .map_err(|norm| Error::Divergence(vec![ChainDivergence { chain: 0, step: 1, norm }]))?;
    Ok(state)
}

struct Stepper<'a> {
    pot: &'a RegularizedPotential,
    scfg: &'a SmoothingConfig,
    eta: f64,
    noise_scale: f64,
    mode: GradientMode,
    grad: Vec<f64>,
    scratch: Scratch,
}

impl<'a> Stepper<'a> {
    fn new(pot: &'a RegularizedPotential, scfg: &'a SmoothingConfig, eta: f64, mode: GradientMode) -> Self {
        let d = pot.dim();
        Self { pot, scfg, eta, noise_scale: (2.0 * eta).sqrt(), mode, grad: vec![0.0; d], scratch: Scratch::new(d) }
    }

    /// Advances `x` in place; on failure returns the offending state norm.
    fn advance<R: Rng + ?Sized>(&mut self, x: &mut [f64], rng: &mut R) -> Result<(), f64> {
        match self.mode {
            GradientMode::Estimated => {
                if estimate_into(self.pot, self.scfg, x, rng, &mut self.grad, &mut self.scratch).is_err() {
                    return Err(norm(x));
                }
            }
            GradientMode::Exact => {
                self.pot.smoothed_gradient(x, self.scfg.mu(), self.scfg.pgg(), &mut self.grad);
            }
        }
        for (xj, gj) in x.iter_mut().zip(&self.grad) {
            let z: f64 = rng.sample(StandardNormal);
            *xj = *xj - self.eta * gj + self.noise_scale * z;
        }
        let n = norm(x);
        if !n.is_finite() || n > DIVERGENCE_NORM {
            return Err(n);
        }
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct ChainOutput {
    last: Vec<f64>,
    snapshots: Vec<Vec<f64>>,
}

fn run_single(
    pot: &RegularizedPotential,
    scfg: &SmoothingConfig,
    lcfg: &LmcConfig,
    chain: usize,
) -> Result<ChainOutput, ChainDivergence> {
    let mut rng = stream(lcfg.seed, Domain::Chain, chain as u64);
    let mut x = vec![0.0; pot.dim()];
    lcfg.init.draw_into(&mut rng, &mut x);
    let every = lcfg.thinning_interval();
    let mut snapshots = Vec::new();
    if lcfg.record_trajectory {
        snapshots.push(x.clone());
    }
    let mut stepper = Stepper::new(pot, scfg, lcfg.eta, lcfg.gradient);
    for k in 1..=lcfg.steps {
        stepper.advance(&mut x, &mut rng).map_err(|norm| ChainDivergence { chain, step: k, norm })?;
        if lcfg.record_trajectory && k % every == 0 {
            snapshots.push(x.clone());
        }
    }
    Ok(ChainOutput { last: x, snapshots })
}

/// Runs `chains` independent chains of `K` steps. Chain `i` draws from the
/// stream `(seed, i)`, so results do not depend on scheduling or thread count.
/// Every diverging chain is reported in a single [`Error::Divergence`].
pub fn run_chain(pot: &RegularizedPotential, scfg: &SmoothingConfig, lcfg: &LmcConfig) -> Result<ChainResult> {
    lcfg.validate(pot, scfg)?;
    let d = pot.dim();
    let outputs: Vec<Result<ChainOutput, ChainDivergence>> =
        (0..lcfg.chains).into_par_iter().map(|c| run_single(pot, scfg, lcfg, c)).collect();

    let mut failures = Vec::new();
    let mut finished = Vec::with_capacity(outputs.len());
    for out in outputs {
        match out {
            Ok(o) => finished.push(o),
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Divergence(failures));
    }

    let mut final_states = Vec::with_capacity(lcfg.chains * d);
    for o in &finished {
        final_states.extend_from_slice(&o.last);
    }
    let trajectory = lcfg.record_trajectory.then(|| {
        let every = lcfg.thinning_interval();
        let count = finished[0].snapshots.len();
        let steps = (0..count).map(|s| s * every).collect();
        let states =
            (0..count).map(|s| finished.iter().flat_map(|o| o.snapshots[s].iter().copied()).collect()).collect();
        Trajectory { steps, states }
    });
    let evals_total = match lcfg.gradient {
        GradientMode::Estimated => (lcfg.chains as u64) * (lcfg.steps as u64) * (scfg.batch() as u64 + 1),
        GradientMode::Exact => 0,
    };
    Ok(ChainResult {
        dim: d,
        chains: lcfg.chains,
        final_states,
        trajectory,
        evals_total,
        provenance: Provenance {
            potential: pot.base().name().to_string(),
            dim: d,
            seed: lcfg.seed,
            eta: lcfg.eta,
            steps: lcfg.steps,
            chains: lcfg.chains,
            mu: scfg.mu(),
            batch: scfg.batch(),
            p: scfg.p(),
            lambda: pot.lambda(),
            gradient: lcfg.gradient,
            init: lcfg.init.clone(),
        },
    })
}

//! Black-box Langevin Monte Carlo for weakly smooth, regularized potentials.
//!
//! Gradients of the target potential are never required: they are estimated
//! from function values at points perturbed by draws of the p-generalized
//! Gaussian law `N_p(0, I_d)` (density proportional to `exp(-||x||_p^p / p)`).
//! The crate also evaluates the closed-form smoothing, estimator and mixing
//! bounds that accompany the method, and ships the machinery to check them
//! empirically (exact and sliced 2-Wasserstein distances between sample sets).
//!
//! Module map:
//!
//! | module        | contents                                                  |
//! |---------------|-----------------------------------------------------------|
//! | [`pgg`]       | sampling, density, normalizer and norm moments of `N_p`   |
//! | [`potential`] | black-box potentials, regularization, derived constants   |
//! | [`smoothing`] | smoothed values, zeroth-order gradient estimator, bounds  |
//! | [`lmc`]       | the Langevin chain driver and its W2 bounds               |
//! | [`transport`] | empirical W2 (1-D, assignment, sliced, to a Gaussian)     |
//! | [`harness`]   | experiment configs, reports, verification suites, CLI     |

pub mod error;
pub mod harness;
pub mod lmc;
pub mod numeric;
pub mod pgg;
pub mod potential;
pub mod rng;
pub mod smoothing;
pub mod transport;

pub use error::{ChainDivergence, Error, Result};
pub use lmc::{
    lemma3_w2_bound, lmc_step, run_chain, theorem1_bound, ChainResult, GradientMode, InitialLaw, LmcConfig, TheoryBound,
};
pub use pgg::PggSpec;
pub use potential::{Holder, Potential, RegularizedPotential};
pub use smoothing::{grad_estimate, GradientEstimate, SmoothingConfig};
pub use transport::SampleSet;

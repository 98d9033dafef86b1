//! C ABI over `pgglmc`.
//!
//! Every fallible function returns a [`PgglmcStatus`] and writes results
//! through out-pointers. On failure, [`pgglmc_last_error`] describes the cause
//! on the calling thread. Handles are opaque; `pgglmc_potential_*`
//! constructors pair with [`pgglmc_potential_free`] and [`pgglmc_run`] with
//! [`pgglmc_chains_free`]. Passing NULL to a `*_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use pgglmc::lmc::{run_chain, theorem1_bound, GradientMode, LmcConfig};
use pgglmc::pgg::PggSpec;
use pgglmc::potential::{build, Holder, Potential, PotentialSpec, RegularizedPotential};
use pgglmc::rng::{stream, Domain};
use pgglmc::smoothing::{grad_estimate, SmoothingConfig};
use pgglmc::transport::{w2_exact_assignment, SampleSet};
use pgglmc::{ChainResult, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgglmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    /// The potential returned a non-finite value.
    Evaluation = 4,
    /// Step size at or above `2 / (M + 2 lambda)`.
    StepSize = 5,
    Divergence = 6,
    Unsupported = 7,
    Panic = 8,
}

impl From<&Error> for PgglmcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parameter { .. } => PgglmcStatus::InvalidArgument,
            Error::Dimension { .. } => PgglmcStatus::Dimension,
            Error::Evaluation { .. } => PgglmcStatus::Evaluation,
            Error::StepSize { .. } => PgglmcStatus::StepSize,
            Error::Divergence(_) => PgglmcStatus::Divergence,
            Error::Unsupported(_) => PgglmcStatus::Unsupported,
        }
    }
}

/// A regularized potential `U(x) + (lambda/2) ||x||^2`.
pub struct PgglmcPotential {
    inner: RegularizedPotential,
}

/// Final states of a set of chains.
pub struct PgglmcChains {
    inner: ChainResult,
}

/// Sampler settings shared by [`pgglmc_run`] and [`pgglmc_bounds`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PgglmcRunParams {
    pub mu: f64,
    pub batch: usize,
    pub p: f64,
    /// A value `<= 0` selects `0.9 * cap`.
    pub eta: f64,
    pub steps: usize,
    pub chains: usize,
    pub seed: u64,
    /// Use the closed-form smoothed gradient instead of the estimator.
    pub exact_gradient: bool,
}

/// Itemized mixing bound, in the order initial, discretization,
/// gradient_bias, smoothing_shift, estimator_variance_smoothing,
/// estimator_variance_gradient, second_moment.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PgglmcBounds {
    pub w2_mixing: f64,
    pub w2_smoothing: f64,
    pub m: f64,
    pub a: f64,
    pub eta: f64,
    pub eta_cap: f64,
    pub geometric_factor: f64,
    pub terms: [f64; 7],
}

/// `f(user, x, dim)` evaluating the base potential at `x`.
pub type PgglmcValueFn = Option<extern "C" fn(user: *mut c_void, x: *const f64, dim: usize) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: PgglmcStatus, message: impl Into<String>) -> PgglmcStatus {
    set_error(message.into());
    status
}

fn guard<F: FnOnce() -> Result<(), PgglmcStatus>>(f: F) -> PgglmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PgglmcStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(PgglmcStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: pgglmc::Result<T>) -> Result<T, PgglmcStatus> {
    r.map_err(|e| fail(PgglmcStatus::from(&e), e.to_string()))
}

fn non_null<T>(ptr: *const T, what: &str) -> Result<(), PgglmcStatus> {
    if ptr.is_null() {
        Err(fail(PgglmcStatus::NullPointer, format!("`{what}` is NULL")))
    } else {
        Ok(())
    }
}

fn optional(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Message for the most recent failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pgglmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pgglmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a built-in base potential (`zero`, `quadratic`, `power`, `l1`,
/// `huber`) and regularizes it. Pass NaN for `alpha`, `lipschitz` or `delta`
/// to keep the default.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_potential_builtin(
    name: *const c_char,
    dim: usize,
    lambda: f64,
    alpha: f64,
    lipschitz: f64,
    delta: f64,
    out: *mut *mut PgglmcPotential,
) -> PgglmcStatus {
    guard(|| {
        non_null(name, "name")?;
        non_null(out, "out")?;
        let name =
            CStr::from_ptr(name).to_str().map_err(|_| fail(PgglmcStatus::InvalidArgument, "`name` is not UTF-8"))?;
        let spec = PotentialSpec {
            name: name.to_string(),
            dim,
            alpha: optional(alpha),
            lipschitz: optional(lipschitz),
            delta: optional(delta),
        };
        let inner = lift(build(&spec).and_then(|base| RegularizedPotential::new(base, lambda)))?;
        *out = Box::into_raw(Box::new(PgglmcPotential { inner }));
        Ok(())
    })
}

struct CallbackPotential {
    f: extern "C" fn(*mut c_void, *const f64, usize) -> f64,
    user: usize,
    dim: usize,
    holder: Holder,
}

impl std::fmt::Debug for CallbackPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CallbackPotential").field("dim", &self.dim).field("holder", &self.holder).finish()
    }
}

impl Potential for CallbackPotential {
    fn name(&self) -> &str {
        "callback"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(self.user as *mut c_void, x.as_ptr(), x.len())
    }

    fn holder(&self) -> Holder {
        self.holder
    }
}

/// Wraps a caller-supplied base potential with declared Hölder constants
/// `(lipschitz, alpha)` and regularizes it.
///
/// # Safety
/// `f` must be safe to call concurrently from several threads with `user`
/// for as long as the handle lives. `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_potential_callback(
    f: PgglmcValueFn,
    user: *mut c_void,
    dim: usize,
    lambda: f64,
    lipschitz: f64,
    alpha: f64,
    out: *mut *mut PgglmcPotential,
) -> PgglmcStatus {
    guard(|| {
        non_null(out, "out")?;
        let f = f.ok_or_else(|| fail(PgglmcStatus::NullPointer, "`f` is NULL"))?;
        if dim == 0 {
            return Err(fail(PgglmcStatus::InvalidArgument, "dimension must be at least 1"));
        }
        let holder = lift(Holder::new(lipschitz, alpha))?;
        let base = Arc::new(CallbackPotential { f, user: user as usize, dim, holder });
        let inner = lift(RegularizedPotential::new(base, lambda))?;
        *out = Box::into_raw(Box::new(PgglmcPotential { inner }));
        Ok(())
    })
}

/// # Safety
/// `pot` must be NULL or a handle from a `pgglmc_potential_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_potential_free(pot: *mut PgglmcPotential) {
    if !pot.is_null() {
        drop(Box::from_raw(pot));
    }
}

/// Regularized value at `x` (length `dim`).
///
/// # Safety
/// Pointers must be valid; `x` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_potential_value(
    pot: *const PgglmcPotential,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> PgglmcStatus {
    guard(|| {
        non_null(pot, "pot")?;
        non_null(x, "x")?;
        non_null(out, "out")?;
        let pot = &(*pot).inner;
        if dim != pot.dim() {
            return Err(fail(PgglmcStatus::Dimension, format!("expected dimension {}, got {dim}", pot.dim())));
        }
        *out = pot.value(std::slice::from_raw_parts(x, dim));
        Ok(())
    })
}

/// Step-size cap `2 / (M + 2 lambda)` for smoothing `(mu, p)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_step_size_cap(
    pot: *const PgglmcPotential,
    mu: f64,
    p: f64,
    out: *mut f64,
) -> PgglmcStatus {
    guard(|| {
        non_null(pot, "pot")?;
        non_null(out, "out")?;
        *out = lift((*pot).inner.max_step_size(mu, p))?;
        Ok(())
    })
}

fn configs(
    pot: &RegularizedPotential,
    params: &PgglmcRunParams,
) -> Result<(SmoothingConfig, LmcConfig, f64), PgglmcStatus> {
    let scfg = lift(PggSpec::new(params.p, pot.dim()).and_then(|g| SmoothingConfig::new(params.mu, params.batch, g)))?;
    let cap = lift(pot.max_step_size(params.mu, params.p))?;
    let eta = if params.eta > 0.0 { params.eta } else { 0.9 * cap };
    let mode = if params.exact_gradient { GradientMode::Exact } else { GradientMode::Estimated };
    let lcfg = lift(LmcConfig::new(pot, &scfg, eta, params.steps, params.chains, params.seed))?.with_gradient(mode);
    lift(lcfg.validate(pot, &scfg))?;
    Ok((scfg, lcfg, cap))
}

/// Runs `params.chains` independent chains from the origin.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_run(
    pot: *const PgglmcPotential,
    params: *const PgglmcRunParams,
    out: *mut *mut PgglmcChains,
) -> PgglmcStatus {
    guard(|| {
        non_null(pot, "pot")?;
        non_null(params, "params")?;
        non_null(out, "out")?;
        let pot = &(*pot).inner;
        let (scfg, lcfg, _) = configs(pot, &*params)?;
        let inner = lift(run_chain(pot, &scfg, &lcfg))?;
        *out = Box::into_raw(Box::new(PgglmcChains { inner }));
        Ok(())
    })
}

/// # Safety
/// `chains` must be NULL or a handle from [`pgglmc_run`].
#[no_mangle]
pub unsafe extern "C" fn pgglmc_chains_free(chains: *mut PgglmcChains) {
    if !chains.is_null() {
        drop(Box::from_raw(chains));
    }
}

/// Number of chains and dimension of a result.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_chains_shape(
    chains: *const PgglmcChains,
    count: *mut usize,
    dim: *mut usize,
) -> PgglmcStatus {
    guard(|| {
        non_null(chains, "chains")?;
        non_null(count, "count")?;
        non_null(dim, "dim")?;
        *count = (*chains).inner.chains;
        *dim = (*chains).inner.dim;
        Ok(())
    })
}

/// Copies the final states, row-major `count x dim`, into `buf`.
///
/// # Safety
/// `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_chains_states(chains: *const PgglmcChains, buf: *mut f64, len: usize) -> PgglmcStatus {
    guard(|| {
        non_null(chains, "chains")?;
        non_null(buf, "buf")?;
        let r = &(*chains).inner;
        let need = r.chains * r.dim;
        if len != need {
            return Err(fail(PgglmcStatus::Dimension, format!("buffer holds {len} values, need {need}")));
        }
        for c in 0..r.chains {
            std::ptr::copy_nonoverlapping(r.state(c).as_ptr(), buf.add(c * r.dim), r.dim);
        }
        Ok(())
    })
}

/// One gradient estimate at `x`, drawn from stream `(seed, index)`.
///
/// # Safety
/// `x` and `out` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_grad_estimate(
    pot: *const PgglmcPotential,
    mu: f64,
    batch: usize,
    p: f64,
    x: *const f64,
    dim: usize,
    seed: u64,
    index: u64,
    out: *mut f64,
) -> PgglmcStatus {
    guard(|| {
        non_null(pot, "pot")?;
        non_null(x, "x")?;
        non_null(out, "out")?;
        let pot = &(*pot).inner;
        let cfg = lift(PggSpec::new(p, dim).and_then(|g| SmoothingConfig::new(mu, batch, g)))?;
        let mut rng = stream(seed, Domain::Verify, index);
        let g = lift(grad_estimate(pot, &cfg, std::slice::from_raw_parts(x, dim), &mut rng))?;
        std::ptr::copy_nonoverlapping(g.value.as_ptr(), out, dim);
        Ok(())
    })
}

/// Itemized mixing bound for `params` with initial distance `w2_init`,
/// `||x*||^2` and second-moment constant `c`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_bounds(
    pot: *const PgglmcPotential,
    params: *const PgglmcRunParams,
    w2_init: f64,
    xstar_norm_sq: f64,
    c: f64,
    out: *mut PgglmcBounds,
) -> PgglmcStatus {
    guard(|| {
        non_null(pot, "pot")?;
        non_null(params, "params")?;
        non_null(out, "out")?;
        let pot = &(*pot).inner;
        let (scfg, lcfg, cap) = configs(pot, &*params)?;
        let t = lift(theorem1_bound(pot, &scfg, &lcfg, w2_init, xstar_norm_sq, c))?;
        let mut terms = [0.0; 7];
        for (slot, term) in terms.iter_mut().zip(&t.terms) {
            *slot = term.value;
        }
        *out = PgglmcBounds {
            w2_mixing: t.w2_mixing,
            w2_smoothing: t.w2_smoothing,
            m: t.m,
            a: t.a,
            eta: lcfg.eta,
            eta_cap: cap,
            geometric_factor: t.geometric_factor,
            terms,
        };
        Ok(())
    })
}

/// Normalizing constant of the `p`-generalized Gaussian in `dim` dimensions.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_pgg_kappa(p: f64, dim: usize, out: *mut f64) -> PgglmcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(PggSpec::new(p, dim))?.kappa();
        Ok(())
    })
}

/// `E ||xi||_p^n` for `xi ~ N_p(0, I_dim)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_pgg_norm_moment(p: f64, dim: usize, n: f64, out: *mut f64) -> PgglmcStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lift(PggSpec::new(p, dim).and_then(|g| g.norm_moment(n)))?;
        Ok(())
    })
}

/// Writes `count` draws, row-major `count x dim`, from stream `(seed, index)`.
///
/// # Safety
/// `out` must hold `count * dim` values.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_pgg_sample(
    p: f64,
    dim: usize,
    count: usize,
    seed: u64,
    index: u64,
    out: *mut f64,
) -> PgglmcStatus {
    guard(|| {
        non_null(out, "out")?;
        let spec = lift(PggSpec::new(p, dim))?;
        let mut rng = stream(seed, Domain::Verify, index);
        let buf = std::slice::from_raw_parts_mut(out, count * dim);
        for row in buf.chunks_exact_mut(dim) {
            spec.sample_into(&mut rng, row);
        }
        Ok(())
    })
}

/// Exact W2 between two equal-size point sets, each row-major `n x dim`.
///
/// # Safety
/// `a` and `b` must hold `n * dim` values.
#[no_mangle]
pub unsafe extern "C" fn pgglmc_w2(a: *const f64, b: *const f64, n: usize, dim: usize, out: *mut f64) -> PgglmcStatus {
    guard(|| {
        non_null(a, "a")?;
        non_null(b, "b")?;
        non_null(out, "out")?;
        let sa = lift(SampleSet::new(std::slice::from_raw_parts(a, n * dim).to_vec(), dim))?;
        let sb = lift(SampleSet::new(std::slice::from_raw_parts(b, n * dim).to_vec(), dim))?;
        *out = lift(w2_exact_assignment(&sa, &sb))?;
        Ok(())
    })
}

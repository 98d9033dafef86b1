#ifndef PGGLMC_H
#define PGGLMC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PgglmcStatus {
  PGGLMC_STATUS_OK = 0,
  PGGLMC_STATUS_NULL_POINTER = 1,
  PGGLMC_STATUS_INVALID_ARGUMENT = 2,
  PGGLMC_STATUS_DIMENSION = 3,
  // The potential returned a non-finite value.
  PGGLMC_STATUS_EVALUATION = 4,
  // Step size at or above `2 / (M + 2 lambda)`.
  PGGLMC_STATUS_STEP_SIZE = 5,
  PGGLMC_STATUS_DIVERGENCE = 6,
  PGGLMC_STATUS_UNSUPPORTED = 7,
  PGGLMC_STATUS_PANIC = 8,
} PgglmcStatus;

// Final states of a set of chains.
typedef struct PgglmcChains PgglmcChains;

// A regularized potential `U(x) + (lambda/2) ||x||^2`.
typedef struct PgglmcPotential PgglmcPotential;

// `f(user, x, dim)` evaluating the base potential at `x`.
typedef double (*PgglmcValueFn)(void *user, const double *x, size_t dim);

// Sampler settings shared by [`pgglmc_run`] and [`pgglmc_bounds`].
typedef struct PgglmcRunParams {
  double mu;
  size_t batch;
  double p;
  // A value `<= 0` selects `0.9 * cap`.
  double eta;
  size_t steps;
  size_t chains;
  uint64_t seed;
  // Use the closed-form smoothed gradient instead of the estimator.
  bool exact_gradient;
} PgglmcRunParams;

// Itemized mixing bound, in the order initial, discretization,
// gradient_bias, smoothing_shift, estimator_variance_smoothing,
// estimator_variance_gradient, second_moment.
typedef struct PgglmcBounds {
  double w2_mixing;
  double w2_smoothing;
  double m;
  double a;
  double eta;
  double eta_cap;
  double geometric_factor;
  double terms[7];
} PgglmcBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *pgglmc_last_error(void);

// Library version as a static NUL-terminated string.
const char *pgglmc_version(void);

// Builds a built-in base potential (`zero`, `quadratic`, `power`, `l1`,
// `huber`) and regularizes it. Pass NaN for `alpha`, `lipschitz` or `delta`
// to keep the default.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum PgglmcStatus pgglmc_potential_builtin(const char *name,
                                           size_t dim,
                                           double lambda,
                                           double alpha,
                                           double lipschitz,
                                           double delta,
                                           struct PgglmcPotential **out);

// Wraps a caller-supplied base potential with declared Hölder constants
// `(lipschitz, alpha)` and regularizes it.
//
// # Safety
// `f` must be safe to call concurrently from several threads with `user`
// for as long as the handle lives. `out` must be a valid pointer.
enum PgglmcStatus pgglmc_potential_callback(PgglmcValueFn f,
                                            void *user,
                                            size_t dim,
                                            double lambda,
                                            double lipschitz,
                                            double alpha,
                                            struct PgglmcPotential **out);

// # Safety
// `pot` must be NULL or a handle from a `pgglmc_potential_*` constructor.
void pgglmc_potential_free(struct PgglmcPotential *pot);

// Regularized value at `x` (length `dim`).
//
// # Safety
// Pointers must be valid; `x` must hold `dim` values.
enum PgglmcStatus pgglmc_potential_value(const struct PgglmcPotential *pot,
                                         const double *x,
                                         size_t dim,
                                         double *out);

// Step-size cap `2 / (M + 2 lambda)` for smoothing `(mu, p)`.
//
// # Safety
// Pointers must be valid.
enum PgglmcStatus pgglmc_step_size_cap(const struct PgglmcPotential *pot,
                                       double mu,
                                       double p,
                                       double *out);

// Runs `params.chains` independent chains from the origin.
//
// # Safety
// Pointers must be valid.
enum PgglmcStatus pgglmc_run(const struct PgglmcPotential *pot,
                             const struct PgglmcRunParams *params,
                             struct PgglmcChains **out);

// # Safety
// `chains` must be NULL or a handle from [`pgglmc_run`].
void pgglmc_chains_free(struct PgglmcChains *chains);

// Number of chains and dimension of a result.
//
// # Safety
// Pointers must be valid.
enum PgglmcStatus pgglmc_chains_shape(const struct PgglmcChains *chains,
                                      size_t *count,
                                      size_t *dim);

// Copies the final states, row-major `count x dim`, into `buf`.
//
// # Safety
// `buf` must hold `len` values.
enum PgglmcStatus pgglmc_chains_states(const struct PgglmcChains *chains, double *buf, size_t len);

// One gradient estimate at `x`, drawn from stream `(seed, index)`.
//
// # Safety
// `x` and `out` must hold `dim` values.
enum PgglmcStatus pgglmc_grad_estimate(const struct PgglmcPotential *pot,
                                       double mu,
                                       size_t batch,
                                       double p,
                                       const double *x,
                                       size_t dim,
                                       uint64_t seed,
                                       uint64_t index,
                                       double *out);

// Itemized mixing bound for `params` with initial distance `w2_init`,
// `||x*||^2` and second-moment constant `c`.
//
// # Safety
// Pointers must be valid.
enum PgglmcStatus pgglmc_bounds(const struct PgglmcPotential *pot,
                                const struct PgglmcRunParams *params,
                                double w2_init,
                                double xstar_norm_sq,
                                double c,
                                struct PgglmcBounds *out);

// Normalizing constant of the `p`-generalized Gaussian in `dim` dimensions.
//
// # Safety
// `out` must be valid.
enum PgglmcStatus pgglmc_pgg_kappa(double p, size_t dim, double *out);

// `E ||xi||_p^n` for `xi ~ N_p(0, I_dim)`.
//
// # Safety
// `out` must be valid.
enum PgglmcStatus pgglmc_pgg_norm_moment(double p, size_t dim, double n, double *out);

// Writes `count` draws, row-major `count x dim`, from stream `(seed, index)`.
//
// # Safety
// `out` must hold `count * dim` values.
enum PgglmcStatus pgglmc_pgg_sample(double p,
                                    size_t dim,
                                    size_t count,
                                    uint64_t seed,
                                    uint64_t index,
                                    double *out);

// Exact W2 between two equal-size point sets, each row-major `n x dim`.
//
// # Safety
// `a` and `b` must hold `n * dim` values.
enum PgglmcStatus pgglmc_w2(const double *a, const double *b, size_t n, size_t dim, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PGGLMC_H */

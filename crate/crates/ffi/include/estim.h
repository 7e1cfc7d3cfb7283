#ifndef ESTIM_H
#define ESTIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EstimStatus {
  ESTIM_STATUS_OK = 0,
  ESTIM_STATUS_NULL_POINTER = 1,
  ESTIM_STATUS_INVALID_ARGUMENT = 2,
  ESTIM_STATUS_SHAPE_MISMATCH = 3,
  /**
   * A parameter outside its model or transform domain.
   */
  ESTIM_STATUS_DOMAIN = 4,
  ESTIM_STATUS_IO = 5,
  ESTIM_STATUS_PARSE = 6,
  ESTIM_STATUS_NUMERIC = 7,
  ESTIM_STATUS_PANIC = 8,
} EstimStatus;

typedef enum EstimTransform {
  ESTIM_TRANSFORM_IDENTITY = 0,
  ESTIM_TRANSFORM_LOG = 1,
  ESTIM_TRANSFORM_LOGIT2 = 2,
  ESTIM_TRANSFORM_FISHER = 3,
  ESTIM_TRANSFORM_LOG_SHIFT2 = 4,
} EstimTransform;

typedef enum EstimBoundsRule {
  ESTIM_BOUNDS_RULE_BASIC = 0,
  ESTIM_BOUNDS_RULE_LITERAL = 1,
} EstimBoundsRule;

/**
 * Trained regression network.
 */
typedef struct EstimNetwork EstimNetwork;

/**
 * Seeded random stream.
 */
typedef struct EstimRng EstimRng;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *estim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *estim_version(void);

/**
 * Creates a random stream for `(seed, stream)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EstimStatus estim_rng_new(uint64_t seed, uint64_t stream, struct EstimRng **out);

/**
 * # Safety
 * `rng` must come from [`estim_rng_new`] and not be used afterwards.
 */
void estim_rng_free(struct EstimRng *rng);

/**
 * Fills `out[0..n]` with standard normal draws.
 *
 * # Safety
 * `rng` must be live; `out` must hold `n` doubles.
 */
enum EstimStatus estim_rng_normal(struct EstimRng *rng, double *out, size_t n);

/**
 * Applies a scalar transform.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EstimStatus estim_transform_apply(enum EstimTransform t, double x, double *out);

/**
 * Inverts a scalar transform.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EstimStatus estim_transform_invert(enum EstimTransform t, double y, double *out);

/**
 * `j` i.i.d. draws from `N(mu, exp(log_var))`.
 *
 * # Safety
 * `rng` must be live; `out` must hold `j` doubles.
 */
enum EstimStatus estim_sim_gaussian(double mu,
                                    double log_var,
                                    size_t j,
                                    struct EstimRng *rng,
                                    double *out);

/**
 * Stationary unit-innovation AR(1) series of length `t`.
 *
 * # Safety
 * `rng` must be live; `out` must hold `t` doubles.
 */
enum EstimStatus estim_sim_ar1(double rho, size_t t, struct EstimRng *rng, double *out);

/**
 * Stochastic-volatility series of length `t`; `scaled` is 0 or 1.
 *
 * # Safety
 * `rng` must be live; `out` must hold `t` doubles.
 */
enum EstimStatus estim_sim_svol(double rho,
                                double nu,
                                double sigma,
                                int32_t scaled,
                                size_t t,
                                struct EstimRng *rng,
                                double *out);

/**
 * Tiles `x[0..t]` up to length `t_k` into `out`; the start of the
 * remainder block is written to `offset` when it is non-null.
 *
 * # Safety
 * `x` must hold `t` doubles, `out` `t_k` doubles; `rng` must be live.
 */
enum EstimStatus estim_replicate(const double *x,
                                 size_t t,
                                 size_t t_k,
                                 struct EstimRng *rng,
                                 double *out,
                                 size_t *offset);

/**
 * Next sampling box from an estimate and `b x p` row-major bootstrap
 * estimates. Writes `p` values to each of `lower` and `upper`.
 *
 * # Safety
 * `theta_hat` must hold `p` doubles, `samples` `b * p`, and both outputs `p`.
 */
enum EstimStatus estim_update_bounds(const double *theta_hat,
                                     const double *samples,
                                     size_t b,
                                     size_t p,
                                     enum EstimBoundsRule rule,
                                     double *lower,
                                     double *upper);

/**
 * Loads a network saved as JSON at `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` a valid pointer.
 */
enum EstimStatus estim_network_load(const char *path, struct EstimNetwork **out);

/**
 * Parses a network from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated UTF-8 string; `out` a valid pointer.
 */
enum EstimStatus estim_network_from_json(const char *json, struct EstimNetwork **out);

/**
 * # Safety
 * `net` must come from a network constructor and not be used afterwards.
 */
void estim_network_free(struct EstimNetwork *net);

/**
 * Values per input sample; 0 for a null handle.
 *
 * # Safety
 * `net` must be live or null.
 */
size_t estim_network_input_len(const struct EstimNetwork *net);

/**
 * Outputs per sample; 0 for a null handle.
 *
 * # Safety
 * `net` must be live or null.
 */
size_t estim_network_output_dim(const struct EstimNetwork *net);

/**
 * Estimates for `n` samples stored row-major in `x`
 * (`n * input_len` values), written to `out` (`n * output_dim` values).
 *
 * # Safety
 * `net` must be live; buffers must have the sizes above.
 */
enum EstimStatus estim_network_predict(const struct EstimNetwork *net,
                                       const double *x,
                                       size_t n,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESTIM_H */

#ifndef LRDWAVE_H
#define LRDWAVE_H

/* Generated by cbindgen from lrdwave-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum LrdStatus {
  LRD_STATUS_OK = 0,
  LRD_STATUS_NULL_POINTER = 1,
  LRD_STATUS_INVALID_ARGUMENT = 2,
  LRD_STATUS_NUMERIC_ERROR = 3,
  LRD_STATUS_UTF8_ERROR = 4,
  LRD_STATUS_PANIC = 5,
} LrdStatus;

/**
 * Opaque filter bank handle.
 */
typedef struct LrdBank LrdBank;

/**
 * Opaque spectral model handle.
 */
typedef struct LrdModel LrdModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lrd_last_error_message(void);

/**
 * Create a FARIMA(0,d,0)-type model normalized to unit variance.
 *
 * # Safety
 * `out` must be a valid pointer; the handle must be released with
 * [`lrd_model_free`].
 */
enum LrdStatus lrd_model_farima(double d, struct LrdModel **out);

/**
 * Release a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void lrd_model_free(struct LrdModel *model);

/**
 * Build a built-in filter bank ("haar", "db2" or "db4") with `levels` scales
 * and difference order `k`.
 *
 * # Safety
 * `family` must be a valid NUL-terminated string, `out` a valid pointer; the
 * handle must be released with [`lrd_bank_free`].
 */
enum LrdStatus lrd_bank_builtin(const char *family,
                                uint32_t levels,
                                uint32_t k,
                                struct LrdBank **out);

/**
 * Release a bank handle. Null is ignored.
 *
 * # Safety
 * `bank` must come from this library and not be freed twice.
 */
void lrd_bank_free(struct LrdBank *bank);

/**
 * Exact synthesis of `n` samples of the stationary Gaussian sequence into
 * `out`; deterministic in (seed, replicate).
 *
 * # Safety
 * `out` must point to at least `n` doubles.
 */
enum LrdStatus lrd_synth_gaussian(const struct LrdModel *model,
                                  uintptr_t n,
                                  uint64_t seed,
                                  uint64_t replicate,
                                  double *out);

/**
 * K-fold cumulative summation in place.
 *
 * # Safety
 * `data` must point to at least `n` doubles.
 */
enum LrdStatus lrd_integrate_k(double *data, uintptr_t n, uint32_t k);

/**
 * Critical chaos order q_c = max{q : q < 1/(1-2d)}.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LrdStatus lrd_critical_order(double d, uint32_t *out);

/**
 * Memory parameter d(q) = q d + (1-q)/2 of the q-th Hermite transform.
 */
double lrd_memory_param(double d, uint32_t q);

/**
 * Self-similarity exponent H = K + q d - q/2 of the limit process family.
 */
double lrd_ss_exponent(uint32_t q, double d, uint32_t k);

/**
 * Per-scale second moments of the wavelet coefficients of `series` for
 * j = j1..=j2 through the bank's h^{(K)} route. Writes j2-j1+1 variances and
 * interior-coefficient counts.
 *
 * # Safety
 * `series` must hold `n` doubles; `out_var` and `out_count` must hold
 * j2-j1+1 entries each.
 */
enum LrdStatus lrd_wavelet_variances(const struct LrdBank *bank,
                                     const double *series,
                                     uintptr_t n,
                                     uint32_t j1,
                                     uint32_t j2,
                                     double *out_var,
                                     uintptr_t *out_count);

/**
 * Estimate the memory exponent d(q0) + K from one series by the wavelet
 * log-variance regression over scales j1..=j2.
 *
 * # Safety
 * `series` must hold `n` doubles; `out` must be a valid pointer.
 */
enum LrdStatus lrd_estimate_memory(const struct LrdBank *bank,
                                   const double *series,
                                   uintptr_t n,
                                   uint32_t j1,
                                   uint32_t j2,
                                   double *out);

/**
 * Variance of the limit field Y_{m,0} for chaos order q, memory d and
 * difference order k, evaluated by the reduced one-dimensional quadrature.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LrdStatus lrd_limit_variance(const struct LrdBank *bank,
                                  uint32_t q,
                                  double d,
                                  uint32_t k,
                                  int32_t m,
                                  double *out);

/**
 * Subordinate a series by a named filter: 0 identity, 1 cube, 2 centered-exp,
 * q >= 3 is reserved; negative values -q select the Hermite polynomial H_q.
 *
 * # Safety
 * `data` must point to at least `n` doubles.
 */
enum LrdStatus lrd_subordinate(double *data, uintptr_t n, int32_t code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LRDWAVE_H */

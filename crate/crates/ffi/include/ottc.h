#ifndef OTTC_H
#define OTTC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Cost functions accepted by [`ottc_sotd_oracle`].
 */
typedef enum {
  OTTC_COST_SQUARED_EUCLIDEAN = 0,
  OTTC_COST_EUCLIDEAN = 1,
  OTTC_COST_CROSS_ENTROPY = 2,
} OttcCost;

typedef enum {
  OTTC_STATUS_OK = 0,
  OTTC_STATUS_NULL_POINTER = 1,
  OTTC_STATUS_INVALID_ARGUMENT = 2,
  OTTC_STATUS_NOT_SIMPLEX = 3,
  OTTC_STATUS_ZERO_TARGET_WEIGHT = 4,
  OTTC_STATUS_SHAPE_MISMATCH = 5,
  OTTC_STATUS_NON_FINITE = 6,
  OTTC_STATUS_INFEASIBLE = 7,
  OTTC_STATUS_BUFFER_TOO_SMALL = 8,
  OTTC_STATUS_PANIC = 9,
} OttcStatus;

/**
 * Opaque transport plan.
 */
typedef struct OttcCoupling OttcCoupling;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *ottc_last_error(void);

/**
 * Computes the monotone transport plan between `alpha` (length `n`) and
 * strictly positive `beta` (length `m`). Free the handle with
 * [`ottc_coupling_free`].
 *
 * # Safety
 * `alpha` and `beta` must point to `n` and `m` readable doubles; `out`
 * must be writable.
 */
OttcStatus ottc_coupling_compute(const double *alpha,
                                 size_t n,
                                 const double *beta,
                                 size_t m,
                                 OttcCoupling **out);

/**
 * # Safety
 * `coupling` must come from [`ottc_coupling_compute`] and not be used
 * afterwards. NULL is ignored.
 */
void ottc_coupling_free(OttcCoupling *coupling);

/**
 * Number of nonzero entries; 0 for NULL.
 *
 * # Safety
 * `coupling` must be NULL or a live handle.
 */
size_t ottc_coupling_len(const OttcCoupling *coupling);

/**
 * Copies entries into three parallel arrays of capacity `cap`, sorted by
 * `(i, j)` with 1-based indices.
 *
 * # Safety
 * `coupling` must be a live handle; each output must hold `cap` elements.
 */
OttcStatus ottc_coupling_entries(const OttcCoupling *coupling,
                                 size_t *i_out,
                                 size_t *j_out,
                                 double *mass_out,
                                 size_t cap);

/**
 * `sum gamma_ij (i - j)^2`.
 *
 * # Safety
 * `coupling` must be a live handle and `out` writable.
 */
OttcStatus ottc_coupling_cost(const OttcCoupling *coupling, double *out);

/**
 * Writes `{"n", "m", "entries": [[i, j, mass], ...]}` plus a terminating
 * nul into `buf`. `needed` receives the required size including the nul;
 * pass `cap = 0` to query it.
 *
 * # Safety
 * `coupling` must be a live handle, `buf` must hold `cap` bytes, `needed`
 * must be writable.
 */
OttcStatus ottc_coupling_to_json(const OttcCoupling *coupling,
                                 char *buf,
                                 size_t cap,
                                 size_t *needed);

/**
 * Gradient of `sum gamma(alpha)_ij cost_ij` with respect to `alpha`.
 * `cost` is a dense `n x m` grid; only entries on the support are read.
 *
 * # Safety
 * `alpha`, `beta`, `cost` must hold `n`, `m`, `n * m` doubles; `grad_out`
 * must hold `n`.
 */
OttcStatus ottc_coupling_backward(const double *alpha,
                                  size_t n,
                                  const double *beta,
                                  size_t m,
                                  const double *cost,
                                  double *grad_out);

/**
 * Inserts the blank (`vocab_size`) between equal neighbours. `out` must
 * hold `cap` tokens; `out_len` receives the augmented length.
 *
 * # Safety
 * `tokens` must hold `m` values, `out` `cap` values; `out_len` writable.
 */
OttcStatus ottc_augment_blanks(const uint32_t *tokens,
                               size_t m,
                               size_t vocab_size,
                               uint32_t *out,
                               size_t cap,
                               size_t *out_len);

/**
 * OTTC loss for `n x k` log-posteriors, target `tokens` (length `m`,
 * blank already inserted), frame weights `alpha` and target weights `beta`.
 *
 * # Safety
 * Pointers must hold `n * k`, `m`, `n`, `m` elements; `loss_out` writable.
 */
OttcStatus ottc_loss(const double *log_post,
                     size_t n,
                     size_t k,
                     const uint32_t *tokens,
                     size_t m,
                     size_t vocab_size,
                     const double *alpha,
                     const double *beta,
                     double *loss_out);

/**
 * OTTC loss with `alpha = softmax(scores)` and its gradients with respect
 * to the log-posteriors (`n x k`) and the scores (`n`).
 *
 * # Safety
 * Inputs must hold `n * k`, `m`, `n`, `m` elements; gradient outputs
 * `n * k` and `n`; `loss_out` writable.
 */
OttcStatus ottc_backward(const double *log_post,
                         size_t n,
                         size_t k,
                         const uint32_t *tokens,
                         size_t m,
                         size_t vocab_size,
                         const double *scores,
                         const double *beta,
                         double *loss_out,
                         double *grad_log_post,
                         double *grad_scores);

/**
 * CTC loss of `n x k` log-posteriors for a blank-free target. When
 * `grad_log_post` is not NULL it receives the `n x k` gradient.
 *
 * # Safety
 * `log_post` must hold `n * k` doubles, `tokens` `m` values, and
 * `grad_log_post` (if not NULL) `n * k` doubles.
 */
OttcStatus ottc_ctc_loss(const double *log_post,
                         size_t n,
                         size_t k,
                         const uint32_t *tokens,
                         size_t m,
                         size_t vocab_size,
                         double *loss_out,
                         double *grad_log_post);

/**
 * Exact sequence transport distance between `x` (`n x d`) and `y`
 * (`m x d`) with uniform weights on the shorter sequence. `cost` is an
 * [`OttcCost`] value.
 *
 * # Safety
 * `x` and `y` must hold `n * d` and `m * d` doubles; `distance_out`
 * writable.
 */
OttcStatus ottc_sotd_oracle(const double *x,
                            size_t n,
                            const double *y,
                            size_t m,
                            size_t d,
                            uint32_t r,
                            uint32_t cost,
                            double *distance_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTTC_H */

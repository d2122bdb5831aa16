#ifndef HJ_HOMOG_H
#define HJ_HOMOG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HjStatus {
  HJ_STATUS_OK = 0,
  HJ_STATUS_NULL_POINTER = 1,
  HJ_STATUS_INVALID_ARGUMENT = 2,
  HJ_STATUS_CONFIG = 3,
  HJ_STATUS_SOLVER = 4,
  HJ_STATUS_PANIC = 5,
} HjStatus;

/**
 * A Hamiltonian with its bump.
 */
typedef struct HjProblem HjProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a problem document (`family`, `pbar`, `potential`, `bump`).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum HjStatus hj_problem_from_json(const char *json, struct HjProblem **out);

/**
 * # Safety
 * `p` must come from `hj_problem_from_json` and not be used afterwards. Null is ignored.
 */
void hj_problem_free(struct HjProblem *p);

/**
 * Spatial dimension of the problem.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum HjStatus hj_problem_dim(const struct HjProblem *p, size_t *out);

/**
 * Unperturbed H̄ in d = 1 by root-finding.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum HjStatus hj_hbar_1d(const struct HjProblem *p, double *out);

/**
 * H̄_R in d = 1 for the problem's bump repeated with period `period`.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum HjStatus hj_hbar_r_1d(const struct HjProblem *p, int64_t period, double *out);

/**
 * H̄_η in d = 1 from the expectation condition.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum HjStatus hj_hbar_eta_1d(const struct HjProblem *p, double eta, double *out);

/**
 * The limit of `R(H̄_R − H̄)` in d = 1.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum HjStatus hj_limit_formula_1d(const struct HjProblem *p, double *out);

/**
 * Discounted grid estimate on `Q_period` with `n` nodes per unit length and the
 * bump as source (default δ schedule).
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum HjStatus hj_hbar_grid(const struct HjProblem *p, uint64_t period, uint64_t n, double *out);

/**
 * Monte Carlo H̄_η in d = 1; writes the mean and its standard error.
 *
 * # Safety
 * `p` must be a live handle; `mean` and `se` must be writable.
 */
enum HjStatus hj_mc_hbar_eta_1d(const struct HjProblem *p,
                                double eta,
                                size_t torus_n,
                                size_t samples,
                                uint64_t seed,
                                double *mean,
                                double *se);

/**
 * Message of the last failed call on this thread, or null. Valid until the next call
 * on this thread.
 */
const char *hj_last_error(void);

/**
 * Static description of a status code.
 */
const char *hj_status_string(enum HjStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HJ_HOMOG_H */

#ifndef COUNTSEQ_H
#define COUNTSEQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_DIMENSION_MISMATCH = 3,
  CS_STATUS_OUT_OF_RANGE = 4,
  CS_STATUS_INFEASIBLE = 5,
  CS_STATUS_SERIALIZATION = 6,
  CS_STATUS_PANIC = 7,
} CsStatus;

/*
 Direction of a hypothesis constraint, passed as `int32_t`.
 */
typedef enum CsRelation {
  /*
   `coeffs · δ <= rhs`
   */
  CS_RELATION_LE = 0,
  /*
   `coeffs · δ >= rhs`
   */
  CS_RELATION_GE = 1,
} CsRelation;

/*
 Opaque handle to one running test.
 */
typedef struct CsTest CsTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Creates a test of `theta0` (`d` probabilities summing to one).
 `prior_k == 0` selects the uniform prior; `prior_k > 0` the prior
 concentrated about the null with total mass `prior_k`.

 # Safety
 `theta0` must point to `d` doubles and `out` must be writable.
 */
enum CsStatus cs_test_new(const double *theta0, uintptr_t d, double prior_k, struct CsTest **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `test` must be null or come from `cs_test_new` / `cs_test_from_json`
 and not have been freed.
 */
void cs_test_free(struct CsTest *test);

/*
 Records one observation of arm `arm`.

 # Safety
 `test` must be a live handle.
 */
enum CsStatus cs_test_observe(struct CsTest *test, uintptr_t arm);

/*
 Records a block of counts, one per arm.

 # Safety
 `test` must be a live handle and `counts` must point to `d` values.
 */
enum CsStatus cs_test_observe_counts(struct CsTest *test, const uint64_t *counts, uintptr_t d);

/*
 Number of arms.

 # Safety
 `test` must be a live handle and `out` writable.
 */
enum CsStatus cs_test_dim(const struct CsTest *test, uintptr_t *out);

/*
 Observations so far.

 # Safety
 `test` must be a live handle and `out` writable.
 */
enum CsStatus cs_test_n(const struct CsTest *test, uint64_t *out);

/*
 Current log posterior odds against the null.

 # Safety
 `test` must be a live handle and `out` writable.
 */
enum CsStatus cs_test_log_odds(const struct CsTest *test, double *out);

/*
 Anytime-valid p-value; never increases.

 # Safety
 `test` must be a live handle and `out` writable.
 */
enum CsStatus cs_test_p_value(const struct CsTest *test, double *out);

/*
 Whether the null is rejected at level `u`.

 # Safety
 `test` must be a live handle and `out` writable.
 */
enum CsStatus cs_test_reject(const struct CsTest *test, double u, bool *out);

/*
 Whether `theta` lies in the confidence set at level `u`.

 # Safety
 `test` must be a live handle, `theta` must point to `d` doubles and `out`
 must be writable.
 */
enum CsStatus cs_test_contains(const struct CsTest *test,
                               const double *theta,
                               uintptr_t d,
                               double u,
                               bool *out);

/*
 Confidence interval for the probability of arm `arm`.

 # Safety
 `test` must be a live handle and `lo`, `hi` writable.
 */
enum CsStatus cs_test_marginal_ci(const struct CsTest *test,
                                  double u,
                                  uintptr_t arm,
                                  double *lo,
                                  double *hi);

/*
 Confidence interval for `Σ coeffs[i]·δ[i]` where arm `i` has probability
 proportional to `rho[i]·exp(δ[i])`. The coefficients must sum to zero.
 Unbounded ends are reported as infinities.

 # Safety
 `test` must be a live handle, `rho` and `coeffs` must point to `d`
 doubles and `lo`, `hi` must be writable.
 */
enum CsStatus cs_test_contrast_ci(const struct CsTest *test,
                                  const double *rho,
                                  const double *coeffs,
                                  uintptr_t d,
                                  double u,
                                  double *lo,
                                  double *hi);

/*
 p-value of the composite null `{δ : coeffs[j]·δ (relations[j]) rhs[j]}`
 at the current counts. `coeffs` holds `m` rows of `d` values, row-major;
 each relation is a `CsRelation` value.

 # Safety
 `test` must be a live handle, `rho` must point to `d` doubles, `coeffs`
 to `m·d` doubles, `relations` and `rhs` to `m` values, and `out` must be
 writable.
 */
enum CsStatus cs_test_composite_p(const struct CsTest *test,
                                  const double *rho,
                                  uintptr_t d,
                                  const double *coeffs,
                                  const int32_t *relations,
                                  const double *rhs,
                                  uintptr_t m,
                                  double *out);

/*
 Writes the `d` mark probabilities `rho[i]·exp(δ[i]) / Σ rho[j]·exp(δ[j])`.

 # Safety
 `rho` and `delta` must point to `d` doubles and `out` to `d` writable ones.
 */
enum CsStatus cs_mark_probability(const double *rho, const double *delta, uintptr_t d, double *out);

/*
 Serializes the test state to a JSON string owned by the caller; release
 it with `cs_string_free`.

 # Safety
 `test` must be a live handle and `out` writable.
 */
enum CsStatus cs_test_to_json(const struct CsTest *test, char **out);

/*
 Restores a test from `cs_test_to_json` output. The state is validated
 before a handle is returned.

 # Safety
 `json` must be a NUL-terminated string and `out` writable.
 */
enum CsStatus cs_test_from_json(const char *json, struct CsTest **out);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must be null or come from `cs_test_to_json` and not have been freed.
 */
void cs_string_free(char *s);

/*
 Copies the last error message of this thread into `buf` (truncated and
 NUL-terminated) and returns the buffer size needed for the whole
 message, or 0 when there is none.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t cs_last_error_message(char *buf, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COUNTSEQ_H */

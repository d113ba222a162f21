#ifndef SPECIES_SAMPLING_H
#define SPECIES_SAMPLING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum SsmStatus {
  SSM_STATUS_OK = 0,
  SSM_STATUS_NULL_POINTER = 1,
  SSM_STATUS_INVALID_ARGUMENT = 2,
  SSM_STATUS_INVALID_PPF = 3,
  SSM_STATUS_PATH_DEPENDENT = 4,
  SSM_STATUS_MISSING_ENTRY = 5,
  SSM_STATUS_DEGENERATE_WEIGHTS = 6,
  SSM_STATUS_BUFFER_TOO_SMALL = 7,
  SSM_STATUS_PARSE = 8,
  SSM_STATUS_METHOD = 9,
  SSM_STATUS_PANIC = 10,
} SsmStatus;

/**
 * A table of log EPPF values.
 */
typedef struct SsmEppfTable SsmEppfTable;

/**
 * A putative PPF.
 */
typedef struct SsmPpf SsmPpf;

/**
 * A prior on weight sequences.
 */
typedef struct SsmWeightModel SsmWeightModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the last error message on this thread, or null if none.
 * Release with [`ssm_string_free`].
 */
char *ssm_last_error_message(void);

/**
 * Releases a string returned by this library. Accepts null.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library and not yet freed.
 */
void ssm_string_free(char *s);

/**
 * Library version as a static string; do not free.
 */
const char *ssm_version(void);

/**
 * Dirichlet process PPF with mass `theta`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SsmStatus ssm_ppf_dp(double theta, struct SsmPpf **out);

/**
 * PPF proportional to `slope·n_j + intercept` for old clusters and `theta`
 * for a new one.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SsmStatus ssm_ppf_linear(double slope, double intercept, double theta, struct SsmPpf **out);

/**
 * PPF proportional to the polynomial `Σ_d coefficients[d]·n_j^d` for old
 * clusters and `theta` for a new one.
 *
 * # Safety
 * `coefficients` must point to `len` doubles; `out` must be valid.
 */
enum SsmStatus ssm_ppf_polynomial(const double *coefficients,
                                  uintptr_t len,
                                  double theta,
                                  struct SsmPpf **out);

/**
 * PPF from a JSON family description such as
 * `{"family":"dp","theta":1.0}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid.
 */
enum SsmStatus ssm_ppf_from_json(const char *json, struct SsmPpf **out);

/**
 * # Safety
 * `ppf` must be null or a handle from this library, freed at most once.
 */
void ssm_ppf_free(struct SsmPpf *ppf);

/**
 * Writes the `k + 1` predictive probabilities at a composition into `out`,
 * which must hold at least `out_len ≥ k + 1` doubles.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum SsmStatus ssm_ppf_evaluate(const struct SsmPpf *ppf,
                                const uintptr_t *sizes,
                                uintptr_t k,
                                double *out,
                                uintptr_t out_len);

/**
 * Checks the balance condition on every composition of total below
 * `bound`. `report` (nullable) receives the JSON report.
 *
 * # Safety
 * `ppf` and `holds` must be valid; `report` may be null.
 */
enum SsmStatus ssm_check_balance(const struct SsmPpf *ppf,
                                 uintptr_t bound,
                                 bool *holds,
                                 char **report);

/**
 * Checks invariance of the PPF under relabeling of old clusters.
 *
 * # Safety
 * `ppf` and `holds` must be valid; `report` may be null.
 */
enum SsmStatus ssm_check_label_symmetry(const struct SsmPpf *ppf,
                                        uintptr_t bound,
                                        bool *holds,
                                        char **report);

/**
 * EPPF table implied by a PPF on all compositions of total up to `bound`.
 * Fails with `PathDependent` when the PPF is not a valid one.
 *
 * # Safety
 * `ppf` and `out` must be valid.
 */
enum SsmStatus ssm_eppf_from_ppf(const struct SsmPpf *ppf,
                                 uintptr_t bound,
                                 struct SsmEppfTable **out);

/**
 * Closed-form Dirichlet process EPPF table.
 *
 * # Safety
 * `out` must be valid.
 */
enum SsmStatus ssm_eppf_dp(double theta, double a, uintptr_t bound, struct SsmEppfTable **out);

/**
 * # Safety
 * `table` must be null or a handle from this library, freed at most once.
 */
void ssm_eppf_free(struct SsmEppfTable *table);

/**
 * Number of compositions in a table; zero for null.
 *
 * # Safety
 * `table` must be null or a valid handle.
 */
uintptr_t ssm_eppf_len(const struct SsmEppfTable *table);

/**
 * Natural log of the EPPF at a composition.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum SsmStatus ssm_eppf_log_prob(const struct SsmEppfTable *table,
                                 const uintptr_t *sizes,
                                 uintptr_t k,
                                 double *out);

/**
 * Dirichlet process EPPF in closed form.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum SsmStatus ssm_dp_eppf(const uintptr_t *sizes,
                           uintptr_t k,
                           double theta,
                           double a,
                           double *out);

/**
 * Weight model from JSON such as
 * `{"kind":"logistic-normal","params":{"a":1,"b":5,"sigma2":1}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid.
 */
enum SsmStatus ssm_weight_model_from_json(const char *json, struct SsmWeightModel **out);

/**
 * Logistic-normal weights with location `−log(1 + e^{a·h − b})` and
 * log-scale variance `sigma2`.
 *
 * # Safety
 * `out` must be valid.
 */
enum SsmStatus ssm_weight_model_logistic_normal(double a,
                                                double b,
                                                double sigma2,
                                                struct SsmWeightModel **out);

/**
 * Dirichlet process stick-breaking weights with mass `theta`.
 *
 * # Safety
 * `out` must be valid.
 */
enum SsmStatus ssm_weight_model_dp(double theta, struct SsmWeightModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, freed at most once.
 */
void ssm_weight_model_free(struct SsmWeightModel *model);

/**
 * Monte Carlo PPF at a composition from `draws` prior weight draws.
 * `probabilities` must hold `out_len ≥ k + 1` doubles; `standard_errors`
 * (same length) and `ess` may be null.
 *
 * # Safety
 * Non-null pointers must be valid for the stated lengths.
 */
enum SsmStatus ssm_estimate_ppf(const struct SsmWeightModel *model,
                                const uintptr_t *sizes,
                                uintptr_t k,
                                uintptr_t draws,
                                uint64_t seed,
                                double *probabilities,
                                double *standard_errors,
                                uintptr_t out_len,
                                double *ess);

/**
 * Runs a collapsed Gibbs sampler described by a JSON request and returns
 * the posterior summary as JSON. The request holds either `"preset"`
 * (`"grid"` or `"sarcoma"`) or `"data"` with a `"likelihood"`, plus the
 * optional `"prior"`, `"iters"`, `"burn_in"` and `"seed"`.
 *
 * # Safety
 * `request` must be a NUL-terminated string; `result` must be valid.
 */
enum SsmStatus ssm_fit_json(const char *request, char **result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECIES_SAMPLING_H */

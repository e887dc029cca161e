#ifndef UMPR_H
#define UMPR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum UmprStatus {
  UMPR_STATUS_OK = 0,
  UMPR_STATUS_NULL_POINTER = 1,
  UMPR_STATUS_INVALID_ARGUMENT = 2,
  UMPR_STATUS_DIMENSION_MISMATCH = 3,
  UMPR_STATUS_EMPTY = 4,
  UMPR_STATUS_PARSE = 5,
  UMPR_STATUS_CONFIG = 6,
  UMPR_STATUS_NUMERICAL = 7,
  UMPR_STATUS_IO = 8,
  UMPR_STATUS_PANIC = 9,
} UmprStatus;

/**
 * Penalty kinds for [`umpr_select`].
 */
typedef enum UmprPenalty {
  UMPR_PENALTY_VC = 0,
  UMPR_PENALTY_MD = 1,
  UMPR_PENALTY_SMD = 2,
  UMPR_PENALTY_RC = 3,
  UMPR_PENALTY_BC = 4,
} UmprPenalty;

/**
 * Opaque dataset.
 */
typedef struct UmprDataset UmprDataset;

/**
 * Opaque preference.
 */
typedef struct UmprPreference UmprPreference;

/**
 * Opaque prediction rule.
 */
typedef struct UmprRule UmprRule;

/**
 * Annealer settings. [`umpr_optimizer_default`] fills the defaults.
 */
typedef struct UmprOptimizer {
  size_t restarts;
  size_t iterations;
  double initial_temperature;
  double cooling;
  double step;
} UmprOptimizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *umpr_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` is null or came from this library and has not been freed.
 */
void umpr_string_free(char *s);

struct UmprOptimizer umpr_optimizer_default(void);

/**
 * Builds a dataset from `n` labels in {-1, 1} and an `n * d` row-major
 * covariate array.
 *
 * # Safety
 * `labels` holds `n` values, `x` holds `n * d` values, `out` is writable.
 */
enum UmprStatus umpr_dataset_new(size_t d,
                                 size_t n,
                                 const int32_t *labels,
                                 const double *x,
                                 struct UmprDataset **out);

/**
 * Reads a `y,x1,...,xd` CSV file.
 *
 * # Safety
 * `path` is a NUL-terminated string, `out` is writable.
 */
enum UmprStatus umpr_dataset_read_csv(const char *path, struct UmprDataset **out);

/**
 * Number of observations, 0 for a null handle.
 *
 * # Safety
 * `data` is null or a live dataset handle.
 */
size_t umpr_dataset_len(const struct UmprDataset *data);

/**
 * Covariate dimension, 0 for a null handle.
 *
 * # Safety
 * `data` is null or a live dataset handle.
 */
size_t umpr_dataset_dim(const struct UmprDataset *data);

/**
 * # Safety
 * `data` is null or a live dataset handle, not used afterwards.
 */
void umpr_dataset_free(struct UmprDataset *data);

/**
 * Constant weight `b` and cutoff `c`.
 *
 * # Safety
 * `out` is writable.
 */
enum UmprStatus umpr_preference_constant(double b, double c, struct UmprPreference **out);

/**
 * Catalog preference 1 to 4.
 *
 * # Safety
 * `out` is writable.
 */
enum UmprStatus umpr_preference_catalog(uint32_t id, struct UmprPreference **out);

/**
 * The utility bound `M` of a preference, NaN for a null handle.
 *
 * # Safety
 * `pref` is null or a live preference handle.
 */
double umpr_preference_bound(const struct UmprPreference *pref);

/**
 * # Safety
 * `pref` is null or a live preference handle, not used afterwards.
 */
void umpr_preference_free(struct UmprPreference *pref);

/**
 * Parses a rule record `d,k,link,coef...`.
 *
 * # Safety
 * `record` is a NUL-terminated string, `out` is writable.
 */
enum UmprStatus umpr_rule_from_record(const char *record, struct UmprRule **out);

/**
 * The rule record; release it with [`umpr_string_free`].
 *
 * # Safety
 * `rule` is a live rule handle, `out` is writable.
 */
enum UmprStatus umpr_rule_to_record(const struct UmprRule *rule, char **out);

/**
 * `f(x)` for a point of the rule's dimension.
 *
 * # Safety
 * `rule` is a live rule handle, `x` holds `d` values, `out` is writable.
 */
enum UmprStatus umpr_rule_evaluate(const struct UmprRule *rule,
                                   const double *x,
                                   size_t d,
                                   double *out);

/**
 * # Safety
 * `rule` is null or a live rule handle, not used afterwards.
 */
void umpr_rule_free(struct UmprRule *rule);

/**
 * Empirical utility `S_n` of a rule.
 *
 * # Safety
 * Handles are live, `out` is writable.
 */
enum UmprStatus umpr_empirical_utility(const struct UmprRule *rule,
                                       const struct UmprDataset *data,
                                       const struct UmprPreference *pref,
                                       double *out);

/**
 * Maximum utility fit over polynomials of total degree `degree` with the
 * identity link. A null `opt` uses the default annealer.
 *
 * # Safety
 * Handles are live, `opt` is null or readable, outputs are writable.
 */
enum UmprStatus umpr_mu_fit(const struct UmprDataset *data,
                            const struct UmprPreference *pref,
                            size_t degree,
                            const struct UmprOptimizer *opt,
                            uint64_t seed,
                            struct UmprRule **out_rule,
                            double *out_utility);

/**
 * Penalized selection over polynomial degrees `1..=depth`, using the
 * preference's bound. Writes the chosen degree and rule.
 *
 * # Safety
 * Handles are live, `opt` is null or readable, outputs are writable.
 */
enum UmprStatus umpr_select(const struct UmprDataset *data,
                            const struct UmprPreference *pref,
                            size_t depth,
                            enum UmprPenalty penalty,
                            double alpha,
                            size_t m,
                            bool technical_term,
                            const struct UmprOptimizer *opt,
                            uint64_t seed,
                            size_t *out_k,
                            struct UmprRule **out_rule);

/**
 * Runs an experiment described by `key = value` lines, with the same keys
 * as the command line, and returns the TSV report. Release it with
 * [`umpr_string_free`]. The `seed` key is required.
 *
 * # Safety
 * `config` is a NUL-terminated string, `out` is writable.
 */
enum UmprStatus umpr_experiment_tsv(const char *config, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UMPR_H */

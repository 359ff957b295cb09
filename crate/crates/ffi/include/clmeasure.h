#ifndef CLMEASURE_H
#define CLMEASURE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * A rational interval containing a probability.
 */
typedef struct ClEnclosure ClEnclosure;

/**
 * A parsed uniform property.
 */
typedef struct ClProperty ClProperty;

/**
 * A seeded group sampler over a finite set of primes.
 */
typedef struct ClSampler ClSampler;

/**
 * A parsed target: a property, an O-set or a D-set.
 */
typedef struct ClTarget ClTarget;

/**
 * Enumeration and rounding limits for local computations.
 */
typedef struct ClBudget {
  uint32_t partition_size_cap;
  uint32_t product_depth;
  uint32_t precision_bits;
} ClBudget;

typedef int32_t ClStatus;

#define CL_OK 0

#define CL_ERR_NULL_POINTER 1

#define CL_ERR_UTF8 2

#define CL_ERR_PARSE 3

#define CL_ERR_NOT_PRIME 4

#define CL_ERR_INVALID_PARTITION 5

#define CL_ERR_INVALID_CONFIG 6

#define CL_ERR_BUDGET 7

#define CL_ERR_IO 8

#define CL_ERR_PANIC 9

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *cl_version(void);

/**
 * The default budget.
 */
struct ClBudget cl_budget_default(void);

/**
 * Copy of the last error message on this thread, or NULL if there was none.
 * Free with `cl_string_free`.
 */
char *cl_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cl_string_free(char *s);

/**
 * `#Aut` of the abelian p-group of type `partition` (e.g. "2,1"), as a
 * decimal string.
 *
 * # Safety
 * `partition` must be a NUL-terminated string; `out` must be writable.
 */
ClStatus cl_aut_order(uint64_t p, const char *partition, char **out);

/**
 * # Safety
 * `expr` must be a NUL-terminated string; `out` must be writable.
 */
ClStatus cl_property_parse(const char *expr, struct ClProperty **out);

/**
 * # Safety
 * `property` must come from `cl_property_parse` and not have been freed.
 */
void cl_property_free(struct ClProperty *property);

/**
 * Parses `O(a; b)`, `D(a; b \ c)` or a property.
 *
 * # Safety
 * `expr` must be a NUL-terminated string; `out` must be writable.
 */
ClStatus cl_target_parse(const char *expr, struct ClTarget **out);

/**
 * # Safety
 * `target` must come from `cl_target_parse` and not have been freed.
 */
void cl_target_free(struct ClTarget *target);

/**
 * `eta(p)`. A NULL budget means the default.
 *
 * # Safety
 * `budget` is NULL or readable; `out` must be writable.
 */
ClStatus cl_eta(uint64_t p, const struct ClBudget *budget, struct ClEnclosure **out);

/**
 * Local probability `P_p` of a property.
 *
 * # Safety
 * `property` must be a live handle; `budget` NULL or readable; `out` writable.
 */
ClStatus cl_local_probability(uint64_t p,
                              const struct ClProperty *property,
                              const struct ClBudget *budget,
                              struct ClEnclosure **out);

/**
 * Global measure of a target with every prime up to `prime_cutoff` in the
 * product.
 *
 * # Safety
 * `target` must be a live handle; `budget` NULL or readable; `out` writable.
 */
ClStatus cl_measure(const struct ClTarget *target,
                    uint64_t prime_cutoff,
                    const struct ClBudget *budget,
                    struct ClEnclosure **out);

/**
 * Measure of a target in the finite product over `primes[0..len]`.
 *
 * # Safety
 * `target` must be a live handle; `primes` must hold `len` values;
 * `budget` NULL or readable; `out` writable.
 */
ClStatus cl_measure_truncated(const struct ClTarget *target,
                              const uint64_t *primes,
                              uintptr_t len,
                              const struct ClBudget *budget,
                              struct ClEnclosure **out);

/**
 * Floating-point view of an enclosure. Any out-pointer may be NULL.
 *
 * # Safety
 * `enclosure` must be a live handle.
 */
ClStatus cl_enclosure_bounds(const struct ClEnclosure *enclosure,
                             double *lo,
                             double *hi,
                             double *approx);

/**
 * Exact ends as `num/den` strings, each freed with `cl_string_free`.
 *
 * # Safety
 * `enclosure` must be a live handle; `lo` and `hi` writable.
 */
ClStatus cl_enclosure_rationals(const struct ClEnclosure *enclosure, char **lo, char **hi);

/**
 * # Safety
 * `enclosure` must come from this library and not have been freed.
 */
void cl_enclosure_free(struct ClEnclosure *enclosure);

/**
 * Sampler over `primes[0..len]` with total-variation budget
 * `epsilon_num / epsilon_den` and largest tabulated size `partition_cap`.
 *
 * # Safety
 * `primes` must hold `len` values; `out` writable.
 */
ClStatus cl_sampler_new(const uint64_t *primes,
                        uintptr_t len,
                        uint64_t seed,
                        uint64_t epsilon_num,
                        uint64_t epsilon_den,
                        uint32_t partition_cap,
                        struct ClSampler **out);

/**
 * Next group in group-file notation (`4,2,3`, `1` for trivial); free with
 * `cl_string_free`.
 *
 * # Safety
 * `sampler` must be a live handle; `out` writable.
 */
ClStatus cl_sampler_next(struct ClSampler *sampler, char **out);

/**
 * # Safety
 * `sampler` must come from `cl_sampler_new` and not have been freed.
 */
void cl_sampler_free(struct ClSampler *sampler);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLMEASURE_H */

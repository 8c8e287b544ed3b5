#ifndef FAKEPRIOR_H
#define FAKEPRIOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_ARGUMENT = 2,
  FP_STATUS_NON_MONOTONE = 3,
  FP_STATUS_GRID_MISMATCH = 4,
  FP_STATUS_UNSUPPORTED = 5,
  FP_STATUS_NO_ROOT = 6,
  FP_STATUS_IO = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  FP_STATUS_INTERNAL = 8,
} FpStatus;

/**
 * Opaque quantile-space distribution.
 */
typedef struct FpDistribution FpDistribution;

/**
 * Opaque mechanism prepared for a reported profile.
 */
typedef struct FpMechanism FpMechanism;

/**
 * Opaque reported profile (two or more buyers on one grid).
 */
typedef struct FpProfile FpProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t fp_last_error(char *buf, size_t len);

/**
 * Builds a closed-form distribution (`uniform`, `equal_revenue`, `affine`,
 * `constant`) on a grid of `n_points`.
 *
 * # Safety
 * `name` must be a NUL-terminated string, `params` must hold `n_params`
 * doubles, `out` must be writable.
 */
enum FpStatus fp_distribution_closed_form(const char *name,
                                          const double *params,
                                          size_t n_params,
                                          size_t n_points,
                                          struct FpDistribution **out);

/**
 * Builds a distribution from `len` weakly decreasing values on the uniform grid.
 *
 * # Safety
 * `values` must hold `len` doubles and `out` must be writable.
 */
enum FpStatus fp_distribution_from_values(const double *values,
                                          size_t len,
                                          struct FpDistribution **out);

/**
 * # Safety
 * `d` must be null or a handle from this library, freed at most once.
 */
void fp_distribution_free(struct FpDistribution *d);

/**
 * Number of grid points, or 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t fp_distribution_len(const struct FpDistribution *d);

/**
 * Copies the grid values into `buf`, which must hold exactly `len` doubles.
 *
 * # Safety
 * `d` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum FpStatus fp_distribution_values(const struct FpDistribution *d, double *buf, size_t len);

/**
 * Monopoly reserve of a distribution: quantile, price and revenue.
 *
 * # Safety
 * `d` must be a live handle; the out-pointers must be writable.
 */
enum FpStatus fp_distribution_reserve(const struct FpDistribution *d,
                                      double *quantile,
                                      double *price,
                                      double *revenue);

/**
 * Collects `n` reported distributions into a profile. The inputs are copied.
 *
 * # Safety
 * `reports` must hold `n` live distribution handles; `out` must be writable.
 */
enum FpStatus fp_profile_new(const struct FpDistribution *const *reports,
                             size_t n,
                             struct FpProfile **out);

/**
 * # Safety
 * `p` must be null or a handle from this library, freed at most once.
 */
void fp_profile_free(struct FpProfile *p);

/**
 * Prepares a mechanism. `family` is either a bare kind (`spa`, `myerson`,
 * `spamr`, `sparqr`, `quantile_reserve`) or the JSON form, e.g.
 * `{"kind":"virtual_efficient","params":{"rule":{"rule":"bid"}}}`.
 *
 * # Safety
 * `family` must be a NUL-terminated string, `profile` a live handle and
 * `out` writable.
 */
enum FpStatus fp_mechanism_new(const char *family,
                               const struct FpProfile *profile,
                               struct FpMechanism **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, freed at most once.
 */
void fp_mechanism_free(struct FpMechanism *m);

/**
 * Number of buyers, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t fp_mechanism_buyers(const struct FpMechanism *m);

/**
 * Ex-post allocation and payments at own quantiles `quantiles[0..n]`.
 * Pass a NaN `reserve_draw` for families without a random reserve.
 *
 * # Safety
 * `m` must be a live handle; `quantiles`, `allocation` and `payments` must
 * each hold `n` doubles, `n` equal to the number of buyers.
 */
enum FpStatus fp_mechanism_outcome(const struct FpMechanism *m,
                                   const double *quantiles,
                                   size_t n,
                                   double reserve_draw,
                                   double *allocation,
                                   double *payments);

/**
 * Interim allocation `x_i*(q)`.
 *
 * # Safety
 * `m` must be a live handle and `out` writable.
 */
enum FpStatus fp_interim_allocation(const struct FpMechanism *m,
                                    size_t buyer,
                                    double q,
                                    double *out);

/**
 * Expected utility of `buyer` whose true distribution is `truth`.
 *
 * # Safety
 * `m` and `truth` must be live handles and `out` writable.
 */
enum FpStatus fp_game_utility(const struct FpMechanism *m,
                              const struct FpDistribution *truth,
                              size_t buyer,
                              double *out);

/**
 * Expected revenue and welfare with true distributions `truths[0..n]`.
 *
 * # Safety
 * `m` must be a live handle, `truths` must hold `n` live handles and the
 * out-pointers must be writable.
 */
enum FpStatus fp_revenue_welfare(const struct FpMechanism *m,
                                 const struct FpDistribution *const *truths,
                                 size_t n,
                                 double *revenue,
                                 double *welfare);

/**
 * Runs a named scenario with default settings on `n_points`; writes 1 to
 * `passed` if all its checks pass and 0 otherwise. Nothing is written to disk.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `passed` writable.
 */
enum FpStatus fp_scenario_run(const char *name, size_t n_points, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAKEPRIOR_H */

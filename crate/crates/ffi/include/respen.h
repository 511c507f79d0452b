#ifndef RESPEN_H
#define RESPEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  RESPEN_STATUS_OK = 0,
  RESPEN_STATUS_NULL_POINTER = 1,
  RESPEN_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The estimator is undefined on some cell, or a fold cannot be trained.
   */
  RESPEN_STATUS_UNDEFINED_MODEL = 3,
  RESPEN_STATUS_NO_ADMISSIBLE_MODEL = 4,
  RESPEN_STATUS_INTERNAL = 5,
} RespenStatus;

typedef enum {
  RESPEN_SCHEME_KIND_EFRON = 0,
  RESPEN_SCHEME_KIND_RADEMACHER = 1,
  RESPEN_SCHEME_KIND_POISSON = 2,
  RESPEN_SCHEME_KIND_RHO = 3,
  RESPEN_SCHEME_KIND_LOO = 4,
} RespenSchemeKind;

typedef enum {
  /**
   * Closed-form resampling penalty with constant `c_over_cw * C_W`.
   */
  RESPEN_PENALTY_KIND_RESAMPLING = 0,
  RESPEN_PENALTY_KIND_MALLOWS = 1,
  /**
   * V-fold penalty with `v` random folds and constant `c_over_cw * (V - 1)`.
   */
  RESPEN_PENALTY_KIND_V_FOLD = 2,
} RespenPenaltyKind;

typedef struct RespenCollection RespenCollection;

typedef struct RespenDataset RespenDataset;

typedef struct RespenPartition RespenPartition;

/**
 * Exchangeable weight scheme. `param` is `m` for Efron, `p` for
 * Rademacher, `mu` for Poisson and `q` for Rho; it is ignored for Loo.
 */
typedef struct {
  RespenSchemeKind kind;
  double param;
} RespenScheme;

typedef struct {
  RespenPenaltyKind kind;
  RespenScheme scheme;
  size_t v;
  double c_over_cw;
} RespenPenaltySpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *respen_last_error(void);

/**
 * # Safety
 * `x` and `y` must point to `n` readable doubles; `out` must be writable.
 */
RespenStatus respen_dataset_new(const double *x, const double *y, size_t n, RespenDataset **out);

/**
 * # Safety
 * `d` must come from [`respen_dataset_new`] and not be freed yet, or be null.
 */
void respen_dataset_free(RespenDataset *d);

/**
 * # Safety
 * `d` must be a live dataset handle or null.
 */
size_t respen_dataset_len(const RespenDataset *d);

/**
 * Partition from `len` breakpoints `0 = b_0 < ... < b_D = 1`.
 *
 * # Safety
 * `breaks` must point to `len` readable doubles; `out` must be writable.
 */
RespenStatus respen_partition_new(const double *breaks, size_t len, RespenPartition **out);

/**
 * # Safety
 * `out` must be writable.
 */
RespenStatus respen_partition_regular(size_t d, RespenPartition **out);

/**
 * # Safety
 * `p` must come from a partition constructor and not be freed yet, or be null.
 */
void respen_partition_free(RespenPartition *p);

/**
 * # Safety
 * `p` must be a live partition handle or null.
 */
size_t respen_partition_dim(const RespenPartition *p);

/**
 * Collection of `len` models. The partitions are copied; the caller keeps
 * ownership of its handles.
 *
 * # Safety
 * `models` must point to `len` live partition handles; `out` must be writable.
 */
RespenStatus respen_collection_new(const RespenPartition *const *models,
                                   size_t len,
                                   RespenCollection **out);

/**
 * # Safety
 * `c` must come from [`respen_collection_new`] and not be freed yet, or be null.
 */
void respen_collection_free(RespenCollection *c);

/**
 * Normalizing constant `C_W` of a scheme at sample size `n`.
 *
 * # Safety
 * `out` must be writable.
 */
RespenStatus respen_scheme_cw(RespenScheme scheme, size_t n, double *out);

/**
 * `E[Z] E[Z^{-1} | Z > 0]` for `Z ~ Binomial(n, p)`.
 *
 * # Safety
 * `out` must be writable.
 */
RespenStatus respen_einv_binomial(uint64_t n, double p, double *out);

/**
 * `E[Z] E[Z^{-1} | Z > 0]` for the marked count among `q` draws without replacement from `n` items,
 * `r` of them marked.
 *
 * # Safety
 * `out` must be writable.
 */
RespenStatus respen_einv_hypergeometric(uint64_t n, uint64_t r, uint64_t q, double *out);

/**
 * `E[Z] E[Z^{-1} | Z > 0]` for `Z ~ Poisson(mu)`.
 *
 * # Safety
 * `out` must be writable.
 */
RespenStatus respen_einv_poisson(double mu, double *out);

/**
 * Closed-form resampling penalty with constant `c`.
 *
 * # Safety
 * `d` and `p` must be live handles; `out` must be writable.
 */
RespenStatus respen_rp_penalty(const RespenDataset *d,
                               const RespenPartition *p,
                               RespenScheme scheme,
                               double c,
                               double *out);

/**
 * Variance estimate from the regular partition with `n / 2` cells.
 *
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
RespenStatus respen_sigma2(const RespenDataset *d, double *out);

/**
 * Mallows penalty `c_ov * 2 sigma2 D / n`.
 */
double respen_mallows_penalty(size_t dim, double sigma2, size_t n, double c_ov);

/**
 * V-fold penalty with constant `c`; `fold_of[i]` in `0..v` is the fold of point `i`.
 *
 * # Safety
 * `d` and `p` must be live handles, `fold_of` must point to one entry per
 * data point, and `out` must be writable.
 */
RespenStatus respen_vfold_penalty(const RespenDataset *d,
                                  const RespenPartition *p,
                                  const size_t *fold_of,
                                  size_t v,
                                  double c,
                                  double *out);

/**
 * Selects a model by penalized empirical risk. `seed` drives any random
 * fold assignment; the result is deterministic given it.
 *
 * # Safety
 * `d` and `c` must be live handles; `selected` must be writable.
 */
RespenStatus respen_select(const RespenDataset *d,
                           const RespenCollection *c,
                           RespenPenaltySpec spec,
                           uint64_t seed,
                           size_t *selected);

/**
 * Ideal penalty correction `delta_{n,p}`.
 */
double respen_delta_ideal(size_t n, double p);

/**
 * Averaged resampling correction for a cell of probability `p`.
 *
 * # Safety
 * `out` must be writable.
 */
RespenStatus respen_delta_penw_bar(RespenScheme scheme, size_t n, double p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESPEN_H */

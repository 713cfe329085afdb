#ifndef CKRBF_H
#define CKRBF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CkrbfStatus {
  CKRBF_STATUS_OK = 0,
  CKRBF_STATUS_NULL_POINTER = 1,
  CKRBF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or unusable data (parse errors, single class, shapes).
   */
  CKRBF_STATUS_DATA = 3,
  /**
   * Ill-conditioned covariance or other numerical failure.
   */
  CKRBF_STATUS_NUMERIC = 4,
  /**
   * The solver hit its iteration cap; the best iterate is still returned.
   */
  CKRBF_STATUS_NOT_CONVERGED = 5,
  CKRBF_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  CKRBF_STATUS_INTERNAL = 7,
} CkrbfStatus;

/**
 * Opaque dataset handle.
 */
typedef struct CkrbfDataset CkrbfDataset;

/**
 * Opaque cluster-kernel handle.
 */
typedef struct CkrbfKernel CkrbfKernel;

/**
 * Opaque trained-SVM handle.
 */
typedef struct CkrbfSvm CkrbfSvm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *ckrbf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ckrbf_version(void);

/**
 * Loads a libsvm (or `.csv`) file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CkrbfStatus ckrbf_dataset_load(const char *path, struct CkrbfDataset **out);

/**
 * Builds a dataset from `n × d` row-major features and `n` labels in
 * {−1, +1} (any two distinct values are mapped, the smaller to −1).
 *
 * # Safety
 * `features` must hold `n*d` doubles, `labels` `n` doubles.
 */
enum CkrbfStatus ckrbf_dataset_new(const double *features,
                                   const double *labels,
                                   size_t n,
                                   size_t d,
                                   struct CkrbfDataset **out);

/**
 * Scales every feature of the dataset to [0, 1] in place.
 *
 * # Safety
 * `ds` must be a live dataset handle.
 */
enum CkrbfStatus ckrbf_dataset_scale(struct CkrbfDataset *ds);

/**
 * Number of samples (0 for a null handle).
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t ckrbf_dataset_n(const struct CkrbfDataset *ds);

/**
 * Number of features (0 for a null handle).
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t ckrbf_dataset_d(const struct CkrbfDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not freed before.
 */
void ckrbf_dataset_free(struct CkrbfDataset *ds);

/**
 * Clusters the dataset's features with k-means and builds the cluster
 * kernel.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum CkrbfStatus ckrbf_kernel_build(const struct CkrbfDataset *ds,
                                    size_t k,
                                    double gamma,
                                    double eps,
                                    uint64_t seed,
                                    struct CkrbfKernel **out);

/**
 * New handle sharing the clustering and covariances, at another γ.
 *
 * # Safety
 * `kernel` must be a live kernel handle and `out` a valid pointer.
 */
enum CkrbfStatus ckrbf_kernel_rescale(const struct CkrbfKernel *kernel,
                                      double gamma,
                                      struct CkrbfKernel **out);

/**
 * `K(x, y)` for two points of dimension `d`.
 *
 * # Safety
 * `x` and `y` must hold `d` doubles; `out` must be valid.
 */
enum CkrbfStatus ckrbf_kernel_eval(const struct CkrbfKernel *kernel,
                                   const double *x,
                                   const double *y,
                                   size_t d,
                                   double *out);

/**
 * Writes the `n × n` Gram matrix of the dataset's points (row-major) into
 * `out`, which must have room for `len >= n*n` doubles.
 *
 * # Safety
 * Handles must be live; `out` must hold `len` doubles.
 */
enum CkrbfStatus ckrbf_kernel_gram(const struct CkrbfKernel *kernel,
                                   const struct CkrbfDataset *ds,
                                   double *out,
                                   size_t len);

/**
 * # Safety
 * `kernel` must be null or a handle not freed before.
 */
void ckrbf_kernel_free(struct CkrbfKernel *kernel);

/**
 * Trains a C-SVC on a precomputed `n × n` Gram matrix. On
 * [`CkrbfStatus::NotConverged`] `out` still receives the best iterate.
 *
 * # Safety
 * `gram` must hold `n*n` doubles, `labels` `n` doubles; `out` valid.
 */
enum CkrbfStatus ckrbf_svm_train(const double *gram,
                                 const double *labels,
                                 size_t n,
                                 double c,
                                 double tol,
                                 struct CkrbfSvm **out);

/**
 * Decision value for one point given its kernel values against the `n`
 * training points.
 *
 * # Safety
 * `gram_row` must hold `n` doubles; `out` valid.
 */
enum CkrbfStatus ckrbf_svm_decision(const struct CkrbfSvm *svm,
                                    const double *gram_row,
                                    size_t n,
                                    double *out);

/**
 * Bias term (NaN for a null handle).
 *
 * # Safety
 * `svm` must be null or a live handle.
 */
double ckrbf_svm_bias(const struct CkrbfSvm *svm);

/**
 * Final dual objective (NaN for a null handle).
 *
 * # Safety
 * `svm` must be null or a live handle.
 */
double ckrbf_svm_objective(const struct CkrbfSvm *svm);

/**
 * Number of support vectors (0 for a null handle).
 *
 * # Safety
 * `svm` must be null or a live handle.
 */
size_t ckrbf_svm_support_count(const struct CkrbfSvm *svm);

/**
 * # Safety
 * `svm` must be null or a handle not freed before.
 */
void ckrbf_svm_free(struct CkrbfSvm *svm);

/**
 * Stratified k-fold cross-validated accuracy. `family` is one of `rbf`,
 * `mrbf`, `ckrbf`, `ckrbf-radial`, `mkrbf`; clustering is transductive.
 *
 * # Safety
 * `ds` must be live, `family` NUL-terminated, `out` valid.
 */
enum CkrbfStatus ckrbf_cross_validate(const struct CkrbfDataset *ds,
                                      const char *family,
                                      size_t k,
                                      double gamma,
                                      double c,
                                      size_t folds,
                                      uint64_t seed,
                                      double *out);

/**
 * Areas under the P_f curves of `n_curves` score grids. Grid `i` has
 * `lengths[i]` scores, stored back to back in `scores`; `out` receives
 * `n_curves` areas over the shared score interval.
 *
 * # Safety
 * `lengths` must hold `n_curves` entries, `scores` their sum, `out`
 * `n_curves` doubles.
 */
enum CkrbfStatus ckrbf_pf_auc(const double *scores,
                              const size_t *lengths,
                              size_t n_curves,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CKRBF_H */

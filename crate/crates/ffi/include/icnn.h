#ifndef ICNN_H
#define ICNN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum IcnnStatus {
  ICNN_STATUS_OK = 0,
  // Invalid configuration or parameter.
  ICNN_STATUS_CONFIG = 2,
  // Unreadable, malformed or inconsistent input data.
  ICNN_STATUS_DATA = 3,
  // Numerical failure (singular system, non-finite values, sampling).
  ICNN_STATUS_NUMERICAL = 4,
  ICNN_STATUS_NULL_POINTER = 10,
  ICNN_STATUS_BUFFER_TOO_SMALL = 11,
  ICNN_STATUS_INVALID_UTF8 = 12,
  ICNN_STATUS_PANIC = 13,
} IcnnStatus;

typedef struct IcnnClassifier IcnnClassifier;

typedef struct IcnnFilterBank IcnnFilterBank;

typedef struct IcnnImage IcnnImage;

typedef struct IcnnOperator IcnnOperator;

typedef struct IcnnPca IcnnPca;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *icnn_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *icnn_version(void);

// Image from `height * width` row-major intensities in [0, 1].
//
// # Safety
// `pixels` must point to `height * width` readable values; `out` must be
// writable.
enum IcnnStatus icnn_image_new(size_t height,
                               size_t width,
                               const double *pixels,
                               struct IcnnImage **out);

// # Safety
// `image` must be null or a handle from this library, not used afterwards.
void icnn_image_free(struct IcnnImage *image);

// # Safety
// `image` must be a valid handle; `height` and `width` must be writable.
enum IcnnStatus icnn_image_dims(const struct IcnnImage *image, size_t *height, size_t *width);

// Copy the pixels out (row-major).
//
// # Safety
// See the buffer convention in the crate documentation.
enum IcnnStatus icnn_image_pixels(const struct IcnnImage *image,
                                  double *out,
                                  size_t cap,
                                  size_t *out_len);

// Transform an image. `spec` is one of `id`, `t(dx,dy)`, `r(degrees)`,
// `f(h)` or `f(v)`.
//
// # Safety
// `image` must be a valid handle, `spec` a NUL-terminated string and `out`
// writable.
enum IcnnStatus icnn_image_transform(const struct IcnnImage *image,
                                     const char *spec,
                                     struct IcnnImage **out);

// Morlet filter bank for square images of side `side`.
//
// # Safety
// `out` must be writable.
enum IcnnStatus icnn_filter_bank_new(size_t side,
                                     uint32_t scales,
                                     uint32_t orientations,
                                     struct IcnnFilterBank **out);

// # Safety
// `bank` must be null or a handle from this library, not used afterwards.
void icnn_filter_bank_free(struct IcnnFilterBank *bank);

// Length of the scattering vector for `order`, or 0 for a null handle.
//
// # Safety
// `bank` must be null or a valid handle.
size_t icnn_filter_bank_output_len(const struct IcnnFilterBank *bank, uint8_t order);

// Scattering coefficients of `image`.
//
// # Safety
// Handles must be valid; see the buffer convention.
enum IcnnStatus icnn_scatter(const struct IcnnFilterBank *bank,
                             const struct IcnnImage *image,
                             uint8_t order,
                             double *out,
                             size_t cap,
                             size_t *out_len);

// Random radial operator of the given radius with 1..=`max_bumps` bumps.
//
// # Safety
// `out` must be writable.
enum IcnnStatus icnn_ieneo_sample(size_t radius,
                                  size_t max_bumps,
                                  uint64_t seed,
                                  struct IcnnOperator **out);

// # Safety
// `op` must be null or a handle from this library, not used afterwards.
void icnn_ieneo_free(struct IcnnOperator *op);

// Copy the `(2r+1)^2` kernel out (row-major).
//
// # Safety
// `op` must be a valid handle; see the buffer convention.
enum IcnnStatus icnn_ieneo_kernel(const struct IcnnOperator *op,
                                  double *out,
                                  size_t cap,
                                  size_t *out_len);

// Same-size operator output of `image`.
//
// # Safety
// Handles must be valid; see the buffer convention.
enum IcnnStatus icnn_ieneo_apply(const struct IcnnOperator *op,
                                 const struct IcnnImage *image,
                                 double *out,
                                 size_t cap,
                                 size_t *out_len);

// Distance between the 0-dimensional sublevel persistence diagrams of two
// images.
//
// # Safety
// Handles must be valid and `distance` writable.
enum IcnnStatus icnn_persistence_distance(const struct IcnnImage *a,
                                          const struct IcnnImage *b,
                                          double *distance);

// PCA on `n` rows of `d` features keeping the smallest number of
// components whose variance share reaches `retention`.
//
// # Safety
// `data` must hold `n * d` values; `out` must be writable.
enum IcnnStatus icnn_pca_fit(const double *data,
                             size_t n,
                             size_t d,
                             double retention,
                             struct IcnnPca **out);

// # Safety
// `pca` must be null or a handle from this library, not used afterwards.
void icnn_pca_free(struct IcnnPca *pca);

// Number of retained components, or 0 for a null handle.
//
// # Safety
// `pca` must be null or a valid handle.
size_t icnn_pca_components(const struct IcnnPca *pca);

// Input dimension, or 0 for a null handle.
//
// # Safety
// `pca` must be null or a valid handle.
size_t icnn_pca_dims(const struct IcnnPca *pca);

// Project one `d`-vector onto the retained components.
//
// # Safety
// `x` must hold `d` values; see the buffer convention.
enum IcnnStatus icnn_pca_project(const struct IcnnPca *pca,
                                 const double *x,
                                 size_t d,
                                 double *out,
                                 size_t cap,
                                 size_t *out_len);

// Fit a binary classifier on `n` rows of `d` features with labels 0/1.
// `spec_json` selects the classifier, e.g. `{"kind":"knn","k":11}`; null
// means the default RBF SVM.
//
// # Safety
// `x` must hold `n * d` values, `labels` `n` values; `spec_json` must be
// null or NUL-terminated; `out` must be writable.
enum IcnnStatus icnn_classifier_fit(const char *spec_json,
                                    const double *x,
                                    size_t n,
                                    size_t d,
                                    const uint8_t *labels,
                                    uint64_t seed,
                                    struct IcnnClassifier **out);

// # Safety
// `model` must be null or a handle from this library, not used afterwards.
void icnn_classifier_free(struct IcnnClassifier *model);

// Predict labels for `n` rows of `d` features into `labels_out`.
//
// # Safety
// `x` must hold `n * d` values and `labels_out` room for `n` labels.
enum IcnnStatus icnn_classifier_predict(const struct IcnnClassifier *model,
                                        const double *x,
                                        size_t n,
                                        size_t d,
                                        uint8_t *labels_out);

// Ridge estimate of the `d x d` map `M` with `M phi_x[i] ~ phi_gx[i]`.
// Writes `M` row-major to `matrix_out` (`d * d` values) and the mean
// absolute fit residual to `fit_residual`.
//
// # Safety
// Inputs must hold `n * d` values; outputs must be writable.
enum IcnnStatus icnn_estimate_map(const double *phi_x,
                                  const double *phi_gx,
                                  size_t n,
                                  size_t d,
                                  double lambda,
                                  double *matrix_out,
                                  double *fit_residual);

// Mean absolute deviation between `phi_x[i]` and `M phi_ginv_x[i]` for a
// row-major `d x d` matrix `M`.
//
// # Safety
// Feature inputs must hold `n * d` values, `matrix` `d * d` values.
enum IcnnStatus icnn_equivariance_error(const double *phi_x,
                                        const double *phi_ginv_x,
                                        size_t n,
                                        size_t d,
                                        const double *matrix,
                                        double *e_q);

// Run the experiment described by the JSON file at `config_path`. When
// `out_dir` is non-null the report artifacts are written there. Mean
// accuracies are written to the non-null output pointers.
//
// # Safety
// Strings must be NUL-terminated; output pointers null or writable.
enum IcnnStatus icnn_run_pipeline(const char *config_path,
                                  const char *out_dir,
                                  bool parallel,
                                  double *mean_pipeline_accuracy,
                                  double *mean_baseline_accuracy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICNN_H */

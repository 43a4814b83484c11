#ifndef ADVBOUND_H
#define ADVBOUND_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum AbStatus {
  AB_STATUS_OK = 0,
  AB_STATUS_NULL_POINTER = 1,
  AB_STATUS_INVALID_ARGUMENT = 2,
  AB_STATUS_DIMENSION_MISMATCH = 3,
  /*
   Factorization failure, non-convergence or a non-finite value.
   */
  AB_STATUS_NUMERICAL = 4,
  AB_STATUS_BUDGET_EXCEEDED = 5,
  AB_STATUS_IO = 6,
  AB_STATUS_FORMAT = 7,
  AB_STATUS_DATASET = 8,
  AB_STATUS_CONFIG = 9,
  AB_STATUS_PANIC = 10,
} AbStatus;

/*
 Per-input bounds and the minimum-input certificate.
 */
typedef struct AbCertificate AbCertificate;

/*
 A fitted latent model: weighted EQ kernels over a set of centres.
 */
typedef struct AbModel AbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null when none has
 failed. The pointer stays valid until the next failing call on the same
 thread.
 */
const char *ab_last_error_message(void);

/*
 Builds a model from row-major `m x d` centres and `m` weights.

 # Safety
 `centers` must point to `m * d` doubles, `alpha` to `m` doubles and
 `out` to writable storage for one handle.
 */
enum AbStatus ab_model_from_parts(const double *centers,
                                  size_t m,
                                  size_t d,
                                  const double *alpha,
                                  double variance,
                                  double lengthscale,
                                  double noise_variance,
                                  struct AbModel **out);

/*
 Fits a Laplace GP classifier on row-major `n x d` inputs in [0, 1] and
 labels of +1 or -1. With `inducing > 0` the model is compressed to that
 many DTC inducing inputs.

 # Safety
 `x` must point to `n * d` doubles, `y` to `n` doubles and `out` to
 writable storage for one handle.
 */
enum AbStatus ab_model_fit_gpc(const double *x,
                               const double *y,
                               size_t n,
                               size_t d,
                               double variance,
                               double lengthscale,
                               double noise_variance,
                               size_t inducing,
                               struct AbModel **out);

/*
 Reads a model written by `ab_model_save` or the command-line `fit`.

 # Safety
 `path` must be a nul-terminated string and `out` writable.
 */
enum AbStatus ab_model_load(const char *path, struct AbModel **out);

/*
 # Safety
 `model` must be a live handle and `path` a nul-terminated string.
 */
enum AbStatus ab_model_save(const struct AbModel *model, const char *path);

/*
 Frees a model handle. Null is ignored.

 # Safety
 `model` must be null or a handle not yet freed.
 */
void ab_model_free(struct AbModel *model);

/*
 # Safety
 `model` must be a live handle and `out` writable.
 */
enum AbStatus ab_model_dims(const struct AbModel *model, size_t *out);

/*
 # Safety
 `model` must be a live handle and `out` writable.
 */
enum AbStatus ab_model_num_centers(const struct AbModel *model, size_t *out);

/*
 Latent mean at `n` row-major points of the model's dimension.

 # Safety
 `x` must point to `n * dims` doubles and `out` to `n` writable doubles.
 */
enum AbStatus ab_predict_latent(const struct AbModel *model,
                                const double *x,
                                size_t n,
                                double *out);

/*
 Gradient of the latent mean at one point.

 # Safety
 `x` must point to `dims` doubles and `out` to `dims` writable doubles.
 */
enum AbStatus ab_latent_gradient(const struct AbModel *model, const double *x, double *out);

/*
 5th and 95th percentile latents over `n` training points.

 # Safety
 `xtrain` must point to `n * dims` doubles; `f05` and `f95` writable.
 */
enum AbStatus ab_thresholds(const struct AbModel *model,
                            const double *xtrain,
                            size_t n,
                            double *f05,
                            double *f95);

/*
 Bounds every input with `slices` slices per axis. `enhance_top_k = 0`
 disables enhancement; otherwise the top sequences are refined to
 `enhance_fine_slices` slices.

 # Safety
 `model` must be a live handle and `out` writable.
 */
enum AbStatus ab_certify(const struct AbModel *model,
                         double f05,
                         double f95,
                         size_t slices,
                         size_t enhance_top_k,
                         size_t enhance_fine_slices,
                         struct AbCertificate **out);

/*
 Frees a certificate handle. Null is ignored.

 # Safety
 `cert` must be null or a handle not yet freed.
 */
void ab_certificate_free(struct AbCertificate *cert);

/*
 Number of per-input bounds.

 # Safety
 `cert` must be a live handle and `out` writable.
 */
enum AbStatus ab_certificate_dims(const struct AbCertificate *cert, size_t *out);

/*
 Copies the per-input bounds; `len` must equal `ab_certificate_dims`.

 # Safety
 `out` must point to `len` writable doubles.
 */
enum AbStatus ab_certificate_bounds(const struct AbCertificate *cert, double *out, size_t len);

/*
 Fewest inputs an attacker must change. `unbounded_safe` is set to 1
 when no number of inputs suffices, and `count` is then 0.

 # Safety
 `count` and `unbounded_safe` must be writable.
 */
enum AbStatus ab_certificate_min_inputs(const struct AbCertificate *cert,
                                        size_t *count,
                                        uint8_t *unbounded_safe);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADVBOUND_H */

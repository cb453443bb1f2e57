#ifndef MSGOD_H
#define MSGOD_H

#pragma once

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MsgodStatus {
  MSGOD_STATUS_OK = 0,
  MSGOD_STATUS_NULL_POINTER = 1,
  MSGOD_STATUS_INVALID_UTF8 = 2,
  MSGOD_STATUS_IO = 3,
  MSGOD_STATUS_PARSE = 4,
  MSGOD_STATUS_INVALID_PARAMETER = 5,
  MSGOD_STATUS_COMPUTATION = 6,
  MSGOD_STATUS_BUFFER_TOO_SMALL = 7,
  MSGOD_STATUS_PANIC = 8,
} MsgodStatus;

/**
 * Why the final probabilities equal the fused ones.
 */
typedef enum MsgodFallback {
  MSGOD_FALLBACK_NONE = 0,
  MSGOD_FALLBACK_EMPTY_POSITIVE = 1,
  MSGOD_FALLBACK_EMPTY_NEGATIVE = 2,
  MSGOD_FALLBACK_NOT_CONVERGED = 3,
  MSGOD_FALLBACK_TRAINING_FAILED = 4,
} MsgodFallback;

/**
 * Opaque dataset handle.
 */
typedef struct MsgodDataset MsgodDataset;

/**
 * Opaque detection result handle.
 */
typedef struct MsgodResult MsgodResult;

/**
 * Pipeline parameters. Obtain sensible defaults from
 * [`msgod_config_default`] and override fields as needed.
 */
typedef struct MsgodConfig {
  double delta;
  double lambda;
  double contamination;
  double delta_tw;
  double c_minus;
  double smo_tol;
  /**
   * 0 keeps every view.
   */
  size_t max_views;
  bool invert_cost_ratio;
  bool boundary_only;
} MsgodConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *msgod_last_error(void);

struct MsgodConfig msgod_config_default(void);

/**
 * Loads a CSV file. `schema_path` may be NULL, in which case column kinds
 * are inferred.
 *
 * # Safety
 * `path` and (if non-NULL) `schema_path` must be NUL-terminated strings;
 * `out` must be a valid pointer to writable storage.
 */
enum MsgodStatus msgod_dataset_load(const char *path,
                                    const char *schema_path,
                                    struct MsgodDataset **out);

/**
 * Builds an all-numerical dataset from a row-major `n_samples × n_features`
 * matrix. `labels` (1 = outlier) may be NULL.
 *
 * # Safety
 * `data` must hold `n_samples * n_features` doubles, `labels` (if
 * non-NULL) `n_samples` bytes; `out` must be writable.
 */
enum MsgodStatus msgod_dataset_from_rows(const double *data,
                                         size_t n_samples,
                                         size_t n_features,
                                         const uint8_t *labels,
                                         struct MsgodDataset **out);

/**
 * # Safety
 * `ds` must be NULL or a live handle from this library.
 */
size_t msgod_dataset_n_samples(const struct MsgodDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a live handle from this library.
 */
size_t msgod_dataset_n_features(const struct MsgodDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a handle from this library not yet freed.
 */
void msgod_dataset_free(struct MsgodDataset *ds);

/**
 * Runs the full detection pipeline. The dataset is normalized internally.
 * `config` may be NULL for defaults.
 *
 * # Safety
 * `ds` must be a live dataset handle, `config` NULL or valid, `out` writable.
 */
enum MsgodStatus msgod_detect(const struct MsgodDataset *ds,
                              const struct MsgodConfig *config,
                              struct MsgodResult **out);

/**
 * Number of samples in the result.
 *
 * # Safety
 * `res` must be NULL or a live result handle.
 */
size_t msgod_result_len(const struct MsgodResult *res);

/**
 * Copies the final outlier probabilities into `out` (capacity `len`).
 *
 * # Safety
 * `res` must be a live result handle and `out` must hold `len` doubles.
 */
enum MsgodStatus msgod_result_final(const struct MsgodResult *res, double *out, size_t len);

/**
 * Copies the fused multi-view probabilities into `out` (capacity `len`).
 *
 * # Safety
 * `res` must be a live result handle and `out` must hold `len` doubles.
 */
enum MsgodStatus msgod_result_fused(const struct MsgodResult *res, double *out, size_t len);

/**
 * Writes each sample's region: 1 positive, 0 boundary, -1 negative.
 *
 * # Safety
 * `res` must be a live result handle and `out` must hold `len` bytes.
 */
enum MsgodStatus msgod_result_regions(const struct MsgodResult *res, int8_t *out, size_t len);

/**
 * Region thresholds `alpha` (positive) and `beta` (negative).
 *
 * # Safety
 * `res` must be a live result handle; `alpha`/`beta` must be writable.
 */
enum MsgodStatus msgod_result_thresholds(const struct MsgodResult *res,
                                         double *alpha,
                                         double *beta);

/**
 * Number of granular views that were fused.
 *
 * # Safety
 * `res` must be NULL or a live result handle.
 */
size_t msgod_result_view_count(const struct MsgodResult *res);

/**
 * # Safety
 * `res` must be NULL or a live result handle.
 */
enum MsgodFallback msgod_result_fallback(const struct MsgodResult *res);

/**
 * # Safety
 * `res` must be NULL or a handle from this library not yet freed.
 */
void msgod_result_free(struct MsgodResult *res);

/**
 * Area under the ROC curve of `scores` against `labels` (1 = outlier).
 *
 * # Safety
 * `scores` must hold `n` doubles, `labels` `n` bytes; `out` must be writable.
 */
enum MsgodStatus msgod_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSGOD_H */

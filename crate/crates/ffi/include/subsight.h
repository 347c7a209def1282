#ifndef SUBSIGHT_H
#define SUBSIGHT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>

/**
 * Number of outputs of every model: coarse-grain percent per layer.
 */
#define SUBSIGHT_N_LAYERS 10

/**
 * Result code of every fallible call.
 */
typedef enum SubsightStatus {
  SUBSIGHT_STATUS_OK = 0,
  SUBSIGHT_STATUS_NULL_POINTER = 1,
  SUBSIGHT_STATUS_INVALID_ARGUMENT = 2,
  SUBSIGHT_STATUS_IO = 3,
  SUBSIGHT_STATUS_PARSE = 4,
  SUBSIGHT_STATUS_DIMENSION = 5,
  SUBSIGHT_STATUS_MASKED = 6,
  SUBSIGHT_STATUS_UNDEFINED_CORRELATION = 7,
  SUBSIGHT_STATUS_FAILED = 8,
  SUBSIGHT_STATUS_PANIC = 9,
} SubsightStatus;

/**
 * Masked displacement, groundwater or precipitation cube.
 */
typedef struct SubsightCube SubsightCube;

/**
 * Fitted tree, forest or recurrent net.
 */
typedef struct SubsightModel SubsightModel;

/**
 * Sample table: per-cell feature histories and 10-layer targets.
 */
typedef struct SubsightSamples SubsightSamples;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *subsight_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *subsight_version(void);

/**
 * Reads a cube file. On success `*out_cube` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_cube` must be writable.
 */
enum SubsightStatus subsight_cube_read(const char *path, struct SubsightCube **out_cube);

/**
 * Releases a cube handle; null is ignored.
 *
 * # Safety
 * `cube` must come from `subsight_cube_read` and not be used afterwards.
 */
void subsight_cube_free(struct SubsightCube *cube);

/**
 * Grid rows, columns and epochs of a cube.
 *
 * # Safety
 * `cube` must be a live handle; the out pointers must be writable.
 */
enum SubsightStatus subsight_cube_dims(const struct SubsightCube *cube,
                                       uintptr_t *n_rows,
                                       uintptr_t *n_cols,
                                       uintptr_t *n_epochs);

/**
 * Value at (`cell`, `epoch`); masked entries return `Masked`.
 *
 * # Safety
 * `cube` must be a live handle; `value` must be writable.
 */
enum SubsightStatus subsight_cube_value(const struct SubsightCube *cube,
                                        uintptr_t cell,
                                        uintptr_t epoch,
                                        double *value);

/**
 * Reads a sample table. On success `*out_samples` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_samples` must be writable.
 */
enum SubsightStatus subsight_samples_read(const char *path, struct SubsightSamples **out_samples);

/**
 * Releases a sample-table handle; null is ignored.
 *
 * # Safety
 * `samples` must come from `subsight_samples_read` and not be used afterwards.
 */
void subsight_samples_free(struct SubsightSamples *samples);

/**
 * Row and feature counts of a sample table.
 *
 * # Safety
 * `samples` must be a live handle; the out pointers must be writable.
 */
enum SubsightStatus subsight_samples_dims(const struct SubsightSamples *samples,
                                          uintptr_t *n_rows,
                                          uintptr_t *n_features);

/**
 * Copies row `row`'s features into `features` (length `n_features`) and
 * its 10 targets into `targets`. Either buffer may be null to skip it.
 *
 * # Safety
 * Non-null buffers must hold the stated number of doubles.
 */
enum SubsightStatus subsight_samples_row(const struct SubsightSamples *samples,
                                         uintptr_t row,
                                         double *features,
                                         uintptr_t n_features,
                                         double *targets);

/**
 * Reads a model file. On success `*out_model` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_model` must be writable.
 */
enum SubsightStatus subsight_model_read(const char *path, struct SubsightModel **out_model);

/**
 * Releases a model handle; null is ignored.
 *
 * # Safety
 * `model` must come from `subsight_model_read` and not be used afterwards.
 */
void subsight_model_free(struct SubsightModel *model);

/**
 * Feature-vector length the model expects.
 *
 * # Safety
 * `model` must be a live handle; `n_features` must be writable.
 */
enum SubsightStatus subsight_model_n_features(const struct SubsightModel *model,
                                              uintptr_t *n_features);

/**
 * Predicts coarse-grain percent for 10 layers from one feature vector.
 *
 * # Safety
 * `features` must hold `n_features` doubles and `out_percent` 10.
 */
enum SubsightStatus subsight_model_predict(const struct SubsightModel *model,
                                           const double *features,
                                           uintptr_t n_features,
                                           double *out_percent);

/**
 * Sample Pearson correlation of two arrays of length `n`.
 *
 * # Safety
 * `x` and `y` must hold `n` doubles; `r` must be writable.
 */
enum SubsightStatus subsight_pearson_r(const double *x, const double *y, uintptr_t n, double *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBSIGHT_H */

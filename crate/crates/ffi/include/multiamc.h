#ifndef MULTIAMC_H
#define MULTIAMC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MamcStatus {
  MAMC_STATUS_OK = 0,
  MAMC_STATUS_NULL_POINTER = 1,
  MAMC_STATUS_INVALID_ARGUMENT = 2,
  MAMC_STATUS_IO = 3,
  MAMC_STATUS_FORMAT = 4,
  MAMC_STATUS_MODEL = 5,
  MAMC_STATUS_PANIC = 6,
} MamcStatus;

/**
 * A loaded or generated dataset.
 */
typedef struct MamcDataset MamcDataset;

/**
 * A trained model restored from a checkpoint, float32.
 */
typedef struct MamcModel MamcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into the library from this thread.
 */
const char *mamc_last_error(void);

/**
 * Number of modulation classes; valid scheme indices are below it.
 */
uint32_t mamc_num_classes(void);

/**
 * Synthesizes `num_samples` unit-power baseband samples of scheme
 * `scheme_index` with the default modem settings. `out_iq` receives
 * `2 * num_samples` values, interleaved I then Q.
 *
 * # Safety
 * `out_iq` must point to `2 * num_samples` writable floats.
 */
enum MamcStatus mamc_synthesize(uint32_t scheme_index,
                                size_t num_samples,
                                uint64_t seed,
                                double *out_iq);

/**
 * Generates the dataset described by a configuration file, or the desk
 * defaults when `config_path` is null.
 *
 * # Safety
 * `config_path` must be null or a nul-terminated string; `out` must be writable.
 */
enum MamcStatus mamc_dataset_generate(const char *config_path, struct MamcDataset **out);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MamcStatus mamc_dataset_load(const char *path, struct MamcDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; `path` a nul-terminated string.
 */
enum MamcStatus mamc_dataset_save(const struct MamcDataset *dataset, const char *path);

/**
 * Example count and per-example tensor shape `n_antennas x 2 x frame_len`.
 *
 * # Safety
 * `dataset` must be a live handle; the out pointers must be writable.
 */
enum MamcStatus mamc_dataset_shape(const struct MamcDataset *dataset,
                                   size_t *len,
                                   uint32_t *n_antennas,
                                   uint32_t *frame_len);

/**
 * Copies example `index` into `tensor` (`capacity` floats available) and
 * writes its label and SNR.
 *
 * # Safety
 * `dataset` must be a live handle; `tensor` must hold `capacity` floats;
 * `label` and `snr_db` must be writable.
 */
enum MamcStatus mamc_dataset_get_example(const struct MamcDataset *dataset,
                                         size_t index,
                                         float *tensor,
                                         size_t capacity,
                                         uint16_t *label,
                                         float *snr_db);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void mamc_dataset_free(struct MamcDataset *dataset);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MamcStatus mamc_model_load(const char *path, struct MamcModel **out);

/**
 * Input shape `n_antennas x 2 x frame_len` per example, and the class count.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum MamcStatus mamc_model_shape(const struct MamcModel *model,
                                 uint32_t *n_antennas,
                                 uint32_t *frame_len,
                                 uint32_t *n_classes);

/**
 * Eval-mode class probabilities and decisions for `batch` examples laid out
 * as `batch x n_antennas x 2 x frame_len` floats. `probabilities` may be
 * null; otherwise it receives `batch x n_classes` values.
 *
 * # Safety
 * `model` must be a live handle, `input` must hold the full batch,
 * `decisions` must hold `batch` values and `probabilities` (if non-null)
 * `batch * n_classes`.
 */
enum MamcStatus mamc_model_predict(const struct MamcModel *model,
                                   const float *input,
                                   size_t batch,
                                   float *probabilities,
                                   uint32_t *decisions);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void mamc_model_free(struct MamcModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTIAMC_H */

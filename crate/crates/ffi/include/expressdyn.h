#ifndef EXPRESSDYN_H
#define EXPRESSDYN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EdStatus {
  ED_STATUS_OK = 0,
  ED_STATUS_NULL_ARGUMENT = 1,
  ED_STATUS_INVALID_UTF8 = 2,
  ED_STATUS_IO = 3,
  /**
   * Malformed file contents or score.
   */
  ED_STATUS_INPUT = 4,
  ED_STATUS_CONFIG = 5,
  /**
   * Training diverged or produced non-finite values.
   */
  ED_STATUS_NUMERICAL = 6,
  /**
   * The caller's buffer is too short; the needed length was written.
   */
  ED_STATUS_BUFFER_TOO_SMALL = 7,
  ED_STATUS_OUT_OF_RANGE = 8,
  ED_STATUS_PANIC = 9,
} EdStatus;

typedef enum EdModelKind {
  ED_MODEL_KIND_LIN = 0,
  ED_MODEL_KIND_FFNN = 1,
  ED_MODEL_KIND_BIRNN = 2,
} EdModelKind;

/**
 * A sensitivity or sensitivity-difference graph: one row per score onset,
 * one column per basis function.
 */
typedef struct EdGraph EdGraph;

/**
 * A trained model.
 */
typedef struct EdModel EdModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * Valid until the next call on this thread.
 */
const char *ed_last_error(void);

/**
 * Library version as a static string.
 */
const char *ed_version(void);

/**
 * Loads a model file written by `expressdyn train` or `fit`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EdStatus ed_model_load(const char *path, struct EdModel **out);

/**
 * # Safety
 * `model` must come from [`ed_model_load`] and not be used afterwards. Null is ignored.
 */
void ed_model_free(struct EdModel *model);

/**
 * # Safety
 * `model` and `out` must be valid pointers.
 */
enum EdStatus ed_model_kind(const struct EdModel *model, enum EdModelKind *out);

/**
 * Predicted normalized loudness at each onset of the score (MusicXML or
 * text dump). Call with `capacity` 0 to learn the length.
 *
 * # Safety
 * `out` must hold `capacity` doubles; other pointers must be valid.
 */
enum EdStatus ed_model_predict(const struct EdModel *model,
                               const char *score_path,
                               double *out,
                               size_t capacity,
                               size_t *out_len);

/**
 * Sensitivity graph of `model` on a score.
 *
 * # Safety
 * `model`, `score_path` and `out` must be valid pointers.
 */
enum EdStatus ed_sensitivity(const struct EdModel *model,
                             const char *score_path,
                             struct EdGraph **out);

/**
 * Sensitivity of `a` minus that of `b` on one score; positive values mark
 * features that drive loudness more in `a`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum EdStatus ed_compare(const struct EdModel *a,
                         const struct EdModel *b,
                         const char *score_path,
                         struct EdGraph **out);

/**
 * # Safety
 * `graph` must come from this library and not be used afterwards. Null is ignored.
 */
void ed_graph_free(struct EdGraph *graph);

/**
 * Number of onsets (rows); 0 for a null graph.
 *
 * # Safety
 * `graph` must be null or valid.
 */
size_t ed_graph_steps(const struct EdGraph *graph);

/**
 * Number of basis functions (columns); 0 for a null graph.
 *
 * # Safety
 * `graph` must be null or valid.
 */
size_t ed_graph_columns(const struct EdGraph *graph);

/**
 * Name of column `index` as `instrument.feature`, owned by the graph; null
 * when out of range.
 *
 * # Safety
 * `graph` must be null or valid.
 */
const char *ed_graph_column_name(const struct EdGraph *graph, size_t index);

/**
 * Onset times in quarter-note beats.
 *
 * # Safety
 * `out` must hold `capacity` doubles; other pointers must be valid.
 */
enum EdStatus ed_graph_times(const struct EdGraph *graph,
                             double *out,
                             size_t capacity,
                             size_t *out_len);

/**
 * All values, row-major (onset by basis function).
 *
 * # Safety
 * `out` must hold `capacity` doubles; other pointers must be valid.
 */
enum EdStatus ed_graph_values(const struct EdGraph *graph,
                              double *out,
                              size_t capacity,
                              size_t *out_len);

/**
 * Values of one column in onset order.
 *
 * # Safety
 * `out` must hold `capacity` doubles; other pointers must be valid.
 */
enum EdStatus ed_graph_column(const struct EdGraph *graph,
                              size_t index,
                              double *out,
                              size_t capacity,
                              size_t *out_len);

/**
 * Writes the graph as CSV (`beat` then one column per basis function).
 *
 * # Safety
 * `graph` and `path` must be valid pointers.
 */
enum EdStatus ed_graph_write_csv(const struct EdGraph *graph, const char *path);

/**
 * Block-wise K-weighted loudness of a WAV file, in LUFS or z-scores when
 * `normalize` is true.
 *
 * # Safety
 * `out` must hold `capacity` doubles; other pointers must be valid.
 */
enum EdStatus ed_loudness_wav(const char *path,
                              size_t block,
                              size_t hop,
                              bool normalize,
                              double *out,
                              size_t capacity,
                              size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXPRESSDYN_H */

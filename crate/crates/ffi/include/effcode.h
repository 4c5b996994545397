#ifndef EFFCODE_H
#define EFFCODE_H

/* Generated from src/lib.rs; rebuild with --features generate-header to refresh. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible API call.
 */
typedef enum EffcodeStatus {
  EFFCODE_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  EFFCODE_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  EFFCODE_STATUS_INVALID_STRING = 2,
  /**
   * The operation itself failed; see `effcode_last_error`.
   */
  EFFCODE_STATUS_FAILURE = 3,
} EffcodeStatus;

/**
 * Opaque handle to a trained network model.
 */
typedef struct EffcodeModel EffcodeModel;

/**
 * Opaque handle to a learned structure stack.
 */
typedef struct EffcodeStructure EffcodeStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread; empty string if none.
 * The pointer is invalidated by the next failing call on the same thread.
 */
const char *effcode_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *effcode_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EffcodeStatus effcode_structure_load(const char *path, struct EffcodeStructure **out);

/**
 * # Safety
 * `s` must come from `effcode_structure_load` and not be freed twice.
 */
void effcode_structure_free(struct EffcodeStructure *s);

/**
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum EffcodeStatus effcode_structure_depth(const struct EffcodeStructure *s, size_t *out);

/**
 * Multi-information trace entry `layer` (0 is the whitened input, `depth`
 * the last layer's codes), in nats.
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum EffcodeStatus effcode_structure_entropy(const struct EffcodeStructure *s,
                                             size_t layer,
                                             double *out);

/**
 * Fraction of retained connections in layer `layer` (0-based).
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum EffcodeStatus effcode_structure_mask_density(const struct EffcodeStructure *s,
                                                  size_t layer,
                                                  double *out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EffcodeStatus effcode_model_load(const char *path, struct EffcodeModel **out);

/**
 * # Safety
 * `m` must come from `effcode_model_load` and not be freed twice.
 */
void effcode_model_free(struct EffcodeModel *m);

/**
 * # Safety
 * `m` and `out` must be valid pointers.
 */
enum EffcodeStatus effcode_model_classes(const struct EffcodeModel *m, size_t *out);

/**
 * # Safety
 * `m` and `out` must be valid pointers.
 */
enum EffcodeStatus effcode_model_depth(const struct EffcodeModel *m, size_t *out);

/**
 * Number of raw input features one example must provide.
 *
 * # Safety
 * `m` and `out` must be valid pointers.
 */
enum EffcodeStatus effcode_model_input_dim(const struct EffcodeModel *m, size_t *out);

/**
 * Classifies `count` examples stored back to back (`features[j*dim + i]`
 * is feature `i` of example `j`) and writes one class id per example.
 * `dim` must equal `effcode_model_input_dim`.
 *
 * # Safety
 * `features` must hold `dim * count` doubles and `out_labels` room for
 * `count` u32 values; `m` must be a live handle.
 */
enum EffcodeStatus effcode_model_predict(const struct EffcodeModel *m,
                                         const double *features,
                                         size_t dim,
                                         size_t count,
                                         uint32_t *out_labels);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EFFCODE_H */

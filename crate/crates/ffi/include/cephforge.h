#ifndef CEPHFORGE_H
#define CEPHFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CephStatus {
  CEPH_STATUS_OK = 0,
  CEPH_STATUS_NULL_POINTER = 1,
  CEPH_STATUS_IO = 2,
  CEPH_STATUS_PARSE = 3,
  CEPH_STATUS_INVALID = 4,
  CEPH_STATUS_DEGENERATE = 5,
  CEPH_STATUS_BUFFER_TOO_SMALL = 6,
  CEPH_STATUS_CONFIG = 7,
  CEPH_STATUS_PANIC = 99,
} CephStatus;

/**
 * Opaque annotated landmark set.
 */
typedef struct CephLandmarkSet CephLandmarkSet;

/**
 * Opaque anatomy schema.
 */
typedef struct CephSchema CephSchema;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *ceph_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ceph_version(void);

/**
 * The bundled 38-landmark schema.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CephStatus ceph_schema_default(struct CephSchema **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CephStatus ceph_schema_load(const char *path, struct CephSchema **out);

/**
 * # Safety
 * `schema` must be NULL or a handle from this library not yet freed.
 */
void ceph_schema_free(struct CephSchema *schema);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CephStatus ceph_landmarks_load(const char *path, struct CephLandmarkSet **out);

/**
 * Parses an annotation from a JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CephStatus ceph_landmarks_from_json(const char *json, struct CephLandmarkSet **out);

/**
 * # Safety
 * `set` must be NULL or a handle from this library not yet freed.
 */
void ceph_landmarks_free(struct CephLandmarkSet *set);

/**
 * Coordinates of landmark `index` (1-based).
 *
 * # Safety
 * `set` must be a live handle; `x` and `y` must be writable.
 */
enum CephStatus ceph_landmarks_point(const struct CephLandmarkSet *set,
                                     uint8_t index,
                                     double *x,
                                     double *y);

/**
 * Validates `set` against `schema`. Writes the number of violations to
 * `violations`; returns `CEPH_STATUS_INVALID` with the report as the error
 * message when there are any.
 *
 * # Safety
 * `set` and `schema` must be live handles; `violations` must be writable.
 */
enum CephStatus ceph_landmarks_validate(const struct CephLandmarkSet *set,
                                        const struct CephSchema *schema,
                                        size_t *violations);

/**
 * Angle in degrees of the named schema constraint.
 *
 * # Safety
 * Handles must be live; `name` NUL-terminated; `degrees` writable.
 */
enum CephStatus ceph_measure_angle(const struct CephLandmarkSet *set,
                                   const struct CephSchema *schema,
                                   const char *name,
                                   double *degrees);

/**
 * Renders the topology image as row-major RGB8 into `buf`
 * (`size * size * 3` bytes). `written` receives the byte count, or the
 * required size when the buffer is too small.
 *
 * # Safety
 * Handles must be live; `buf` must hold `buf_len` writable bytes;
 * `written` must be writable.
 */
enum CephStatus ceph_rasterize(const struct CephLandmarkSet *set,
                               const struct CephSchema *schema,
                               uint32_t size,
                               uint8_t *buf,
                               size_t buf_len,
                               size_t *written);

/**
 * Per-landmark radial errors in millimetres, in landmark order.
 *
 * # Safety
 * Handles must be live; `out` must hold `out_len` doubles; `count` writable.
 */
enum CephStatus ceph_radial_errors(const struct CephLandmarkSet *pred,
                                   const struct CephLandmarkSet *gt,
                                   double *out,
                                   size_t out_len,
                                   size_t *count);

/**
 * `count` prompts from the bundled lexicon, newline separated. Release
 * the string with [`ceph_string_free`].
 *
 * # Safety
 * `out` must be writable.
 */
enum CephStatus ceph_generate_prompts(size_t count, uint64_t seed, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void ceph_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CEPHFORGE_H */

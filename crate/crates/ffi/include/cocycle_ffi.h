#ifndef COCYCLE_FFI_H
#define COCYCLE_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CocycleGenerator {
  COCYCLE_GENERATOR_GENERIC = 0,
  COCYCLE_GENERATOR_SADDLE = 1,
  COCYCLE_GENERATOR_DET_ONE2D = 2,
} CocycleGenerator;

typedef enum CocycleStage {
  COCYCLE_STAGE_REALIFY = 0,
  COCYCLE_STAGE_PUSH_MODULI = 1,
  COCYCLE_STAGE_SMALL_ANGLE = 2,
  COCYCLE_STAGE_PIPELINE = 3,
} CocycleStage;

typedef enum CocycleStatus {
  COCYCLE_STATUS_OK = 0,
  COCYCLE_STATUS_NULL_POINTER = 1,
  COCYCLE_STATUS_INVALID_ARGUMENT = 2,
  COCYCLE_STATUS_PARSE = 3,
  /**
   * the library reported an error; see `cocycle_last_error`
   */
  COCYCLE_STATUS_DOMAIN = 4,
  COCYCLE_STATUS_BUFFER_TOO_SMALL = 5,
  COCYCLE_STATUS_PANIC = 6,
} CocycleStatus;

/**
 * Opaque periodic cocycle.
 */
typedef struct Cocycle Cocycle;

/**
 * Opaque glued map.
 */
typedef struct CocycleGlued CocycleGlued;

/**
 * Opaque synthesis result.
 */
typedef struct CocycleOutcome CocycleOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cocycle_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library or be null.
 */
void cocycle_string_free(char *s);

/**
 * Build from `period` row-major dim×dim matrices stored back to back.
 *
 * # Safety
 * `data` must point to dim·dim·period doubles; `out` must be writable.
 */
enum CocycleStatus cocycle_new(uintptr_t dim,
                               uintptr_t period,
                               const double *data,
                               struct Cocycle **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CocycleStatus cocycle_from_json(const char *json, struct Cocycle **out);

/**
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CocycleStatus cocycle_to_json(const struct Cocycle *c, char **out);

/**
 * # Safety
 * `c` must come from this library or be null.
 */
void cocycle_free(struct Cocycle *c);

/**
 * # Safety
 * `c` must be a live handle.
 */
uintptr_t cocycle_dim(const struct Cocycle *c);

/**
 * # Safety
 * `c` must be a live handle.
 */
uintptr_t cocycle_period(const struct Cocycle *c);

/**
 * max over maps of ‖A‖ and ‖A⁻¹‖.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CocycleStatus cocycle_bound(const struct Cocycle *c, double *out);

/**
 * # Safety
 * `a`, `b` must be live handles; `out` must be writable.
 */
enum CocycleStatus cocycle_distance(const struct Cocycle *a, const struct Cocycle *b, double *out);

/**
 * First-return moduli in increasing order, written to `out[0..dim]`.
 *
 * # Safety
 * `c` must be a live handle; `out` must hold `len` doubles.
 */
enum CocycleStatus cocycle_moduli(const struct Cocycle *c, double *out, uintptr_t len);

/**
 * # Safety
 * `out` must be writable.
 */
enum CocycleStatus cocycle_generate(enum CocycleGenerator kind,
                                    uintptr_t dim,
                                    uintptr_t period,
                                    double bound,
                                    uint64_t seed,
                                    struct Cocycle **out);

/**
 * Run one synthesis stage, or the whole pipeline.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CocycleStatus cocycle_synthesize(const struct Cocycle *c,
                                      enum CocycleStage stage,
                                      double epsilon,
                                      uintptr_t n,
                                      uint64_t seed,
                                      struct CocycleOutcome **out);

/**
 * # Safety
 * `o` must come from this library or be null.
 */
void cocycle_outcome_free(struct CocycleOutcome *o);

/**
 * 1 when every certificate passed, 0 otherwise (or for null).
 *
 * # Safety
 * `o` must be a live handle.
 */
int32_t cocycle_outcome_passed(const struct CocycleOutcome *o);

/**
 * # Safety
 * `o` must be a live handle.
 */
double cocycle_outcome_radius(const struct CocycleOutcome *o);

/**
 * # Safety
 * `o` must be a live handle; `out` must be writable.
 */
enum CocycleStatus cocycle_outcome_end(const struct CocycleOutcome *o, struct Cocycle **out);

/**
 * # Safety
 * `o` must be a live handle; `out` must be writable.
 */
enum CocycleStatus cocycle_outcome_to_json(const struct CocycleOutcome *o, char **out);

/**
 * Glue row-major `outer` (far away) and `inner` (near the origin) with the
 * smooth plateau between radii `r_in` and `r_out`.
 *
 * # Safety
 * `outer`, `inner` must hold dim·dim doubles; `out` must be writable.
 */
enum CocycleStatus cocycle_glued_new(uintptr_t dim,
                                     const double *outer,
                                     const double *inner,
                                     double r_in,
                                     double r_out,
                                     struct CocycleGlued **out);

/**
 * # Safety
 * `g` must come from this library or be null.
 */
void cocycle_glued_free(struct CocycleGlued *g);

/**
 * y = C(x) for vectors of length dim.
 *
 * # Safety
 * `g` must be a live handle; `x`, `y` must hold dim doubles.
 */
enum CocycleStatus cocycle_glued_apply(const struct CocycleGlued *g, const double *x, double *y);

/**
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
enum CocycleStatus cocycle_glued_size(const struct CocycleGlued *g, uintptr_t samples, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COCYCLE_FFI_H */
